#include "mfrec/analysis.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>

#include "mfrec/csv.hpp"

namespace mfrec {

std::vector<PopularityEntry> popularity_table(const Dataset& ds) {
    if (ds.num_ratings() == 0) throw DataError("popularity of an empty dataset");
    const int n = ds.num_items();
    std::vector<double> score_sum(static_cast<std::size_t>(n), 0.0);
    std::vector<double> count(static_cast<std::size_t>(n), 0.0);
    double total_score = 0.0;
    for (const Dataset::Entry& e : ds.entries()) {
        score_sum[static_cast<std::size_t>(e.item)] += e.rating;
        count[static_cast<std::size_t>(e.item)] += 1.0;
        total_score += e.rating;
    }
    const double total_count = static_cast<double>(ds.num_ratings());

    std::vector<PopularityEntry> table;
    table.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const ItemProfile& p = ds.tables().items[static_cast<std::size_t>(i)];
        PopularityEntry e;
        e.item_id = p.item_id;
        e.title = p.title;
        e.grade = score_sum[static_cast<std::size_t>(i)] / total_score;
        e.unums = count[static_cast<std::size_t>(i)] / total_count;
        e.popularity = (0.5 * e.grade + 0.5 * e.unums) * 100.0;
        table.push_back(std::move(e));
    }
    std::sort(table.begin(), table.end(), [](const PopularityEntry& a, const PopularityEntry& b) {
        if (a.popularity != b.popularity) return a.popularity > b.popularity;
        return a.item_id < b.item_id;
    });
    return table;
}

const char* to_string(CohortRank r) {
    switch (r) {
        case CohortRank::Sum: return "sum";
        case CohortRank::Count: return "count";
        case CohortRank::Mean: return "mean";
    }
    return "?";
}

CohortRank cohort_rank_from_string(const std::string& s) {
    if (s == "sum") return CohortRank::Sum;
    if (s == "count") return CohortRank::Count;
    if (s == "mean") return CohortRank::Mean;
    throw std::invalid_argument("unknown cohort ranking: " + s);
}

namespace {

CohortTopList rank_cohort(const Dataset& ds, const std::vector<bool>& in_cohort,
                          std::string label, int n, const std::set<std::int64_t>& exclude,
                          CohortRank rank) {
    const int items = ds.num_items();
    std::vector<double> sum(static_cast<std::size_t>(items), 0.0);
    std::vector<double> cnt(static_cast<std::size_t>(items), 0.0);
    bool cohort_has_users = false;
    for (const Dataset::Entry& e : ds.entries()) {
        if (!in_cohort[static_cast<std::size_t>(e.user)]) continue;
        cohort_has_users = true;
        sum[static_cast<std::size_t>(e.item)] += e.rating;
        cnt[static_cast<std::size_t>(e.item)] += 1.0;
    }
    if (!cohort_has_users)
        std::cerr << "warning: cohort '" << label << "' has no ratings\n";

    std::vector<std::pair<std::int64_t, double>> scored;
    for (int i = 0; i < items; ++i) {
        if (cnt[static_cast<std::size_t>(i)] == 0.0) continue;
        const std::int64_t ext = ds.tables().items[static_cast<std::size_t>(i)].item_id;
        if (exclude.count(ext)) continue;
        double score = 0.0;
        switch (rank) {
            case CohortRank::Sum: score = sum[static_cast<std::size_t>(i)]; break;
            case CohortRank::Count: score = cnt[static_cast<std::size_t>(i)]; break;
            case CohortRank::Mean:
                score = sum[static_cast<std::size_t>(i)] / cnt[static_cast<std::size_t>(i)];
                break;
        }
        scored.emplace_back(ext, score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (n >= 0 && scored.size() > static_cast<std::size_t>(n)) scored.resize(static_cast<std::size_t>(n));
    return CohortTopList{std::move(label), std::move(scored)};
}

}  // namespace

CohortTopList cohort_top(const Dataset& ds, int bucket, int n,
                         const std::set<std::int64_t>& exclude, CohortRank rank) {
    if (bucket < 0 || bucket >= kAgeBucketCount)
        throw std::invalid_argument("age bucket out of range: " + std::to_string(bucket));
    const auto& users = ds.tables().users;
    std::vector<bool> in_cohort(users.size(), false);
    for (std::size_t u = 0; u < users.size(); ++u)
        in_cohort[u] = age_to_bucket(users[u].age) == bucket;
    return rank_cohort(ds, in_cohort, age_bucket_label(bucket), n, exclude, rank);
}

CohortTopList cohort_top_merged(const Dataset& ds, const std::vector<int>& buckets, int n,
                                const std::set<std::int64_t>& exclude, CohortRank rank) {
    std::vector<bool> wanted(kAgeBucketCount, false);
    std::string label;
    for (int b : buckets) {
        if (b < 0 || b >= kAgeBucketCount)
            throw std::invalid_argument("age bucket out of range: " + std::to_string(b));
        wanted[static_cast<std::size_t>(b)] = true;
        if (!label.empty()) label += "+";
        label += age_bucket_label(b);
    }
    const auto& users = ds.tables().users;
    std::vector<bool> in_cohort(users.size(), false);
    for (std::size_t u = 0; u < users.size(); ++u)
        in_cohort[u] = wanted[static_cast<std::size_t>(age_to_bucket(users[u].age))];
    return rank_cohort(ds, in_cohort, std::move(label), n, exclude, rank);
}

OverlapResult cohort_overlap(const std::vector<CohortTopList>& lists) {
    if (lists.size() < 2) throw std::invalid_argument("overlap needs at least 2 lists");
    std::vector<std::set<std::int64_t>> sets;
    sets.reserve(lists.size());
    for (const CohortTopList& list : lists) {
        std::set<std::int64_t> s;
        for (const auto& [id, score] : list.ranked) s.insert(id);
        sets.push_back(std::move(s));
    }
    OverlapResult result;
    result.pairwise.assign(lists.size(), std::vector<int>(lists.size(), 0));
    for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = 0; b < sets.size(); ++b) {
            int common = 0;
            for (std::int64_t id : sets[a]) common += sets[b].count(id) ? 1 : 0;
            result.pairwise[a][b] = common;
        }
    }
    std::set<std::int64_t> common = sets[0];
    for (std::size_t a = 1; a < sets.size(); ++a) {
        std::set<std::int64_t> next;
        for (std::int64_t id : common)
            if (sets[a].count(id)) next.insert(id);
        common = std::move(next);
    }
    result.common.assign(common.begin(), common.end());
    return result;
}

Demographics demographics(const Dataset& ds) {
    Demographics d;
    d.total_users = ds.tables().users.size();
    std::size_t male = 0, female = 0;
    std::vector<std::size_t> buckets(kAgeBucketCount, 0);
    for (const UserProfile& u : ds.tables().users) {
        (u.gender == Gender::M ? male : female) += 1;
        buckets[static_cast<std::size_t>(age_to_bucket(u.age))] += 1;
    }
    d.gender_counts = {{"M", male}, {"F", female}};
    for (int b = 0; b < kAgeBucketCount; ++b)
        d.age_counts.emplace_back(age_bucket_label(b), buckets[static_cast<std::size_t>(b)]);
    return d;
}

void write_popularity_csv(std::ostream& os, const std::vector<PopularityEntry>& table) {
    os << "rank,item_id,title,grade,unums,popularity\n";
    int rank = 1;
    for (const PopularityEntry& e : table) {
        os << rank++ << ',' << e.item_id << ',' << csv_quote(e.title) << ','
           << format_double(e.grade, 10) << ',' << format_double(e.unums, 10) << ','
           << format_double(e.popularity, 10) << '\n';
    }
}

void write_cohort_csv(std::ostream& os, const std::vector<CohortTopList>& lists) {
    os << "cohort,rank,item_id,score\n";
    for (const CohortTopList& list : lists) {
        int rank = 1;
        for (const auto& [id, score] : list.ranked)
            os << csv_quote(list.label) << ',' << rank++ << ',' << id << ','
               << format_double(score, 10) << '\n';
    }
}

void write_overlap_csv(std::ostream& os, const std::vector<CohortTopList>& lists,
                       const OverlapResult& overlap) {
    os << "cohort_a,cohort_b,common_items\n";
    for (std::size_t a = 0; a < lists.size(); ++a)
        for (std::size_t b = a + 1; b < lists.size(); ++b)
            os << csv_quote(lists[a].label) << ',' << csv_quote(lists[b].label) << ','
               << overlap.pairwise[a][b] << '\n';
}

void write_common_csv(std::ostream& os, const OverlapResult& overlap) {
    os << "item_id\n";
    for (std::int64_t id : overlap.common) os << id << '\n';
}

void write_demographics_csv(std::ostream& os, const Demographics& d) {
    os << "family,key,count,share\n";
    const double total = d.total_users == 0 ? 1.0 : static_cast<double>(d.total_users);
    for (const auto& [key, count] : d.gender_counts)
        os << "gender," << key << ',' << count << ','
           << format_double(static_cast<double>(count) / total, 10) << '\n';
    for (const auto& [key, count] : d.age_counts)
        os << "age," << csv_quote(key) << ',' << count << ','
           << format_double(static_cast<double>(count) / total, 10) << '\n';
}

std::string render_popularity_table(const std::vector<PopularityEntry>& table, int top_n) {
    std::ostringstream os;
    os << std::left << std::setw(6) << "rank" << std::setw(9) << "item" << std::setw(42)
       << "title" << std::right << std::setw(12) << "popularity" << '\n';
    int rank = 1;
    for (const PopularityEntry& e : table) {
        if (rank > top_n) break;
        char pop[32];
        std::snprintf(pop, sizeof pop, "%.4f%%", e.popularity);
        os << std::left << std::setw(6) << rank++ << std::setw(9) << e.item_id << std::setw(42)
           << (e.title.size() > 40 ? e.title.substr(0, 40) : e.title) << std::right
           << std::setw(12) << pop << '\n';
    }
    return os.str();
}

std::string render_cohort_table(const std::vector<CohortTopList>& lists) {
    std::ostringstream os;
    std::size_t width = 0;
    for (const CohortTopList& list : lists) width = std::max(width, list.ranked.size());
    os << std::left << std::setw(12) << "cohort";
    for (std::size_t r = 1; r <= width; ++r) os << std::right << std::setw(6) << r;
    os << '\n';
    for (const CohortTopList& list : lists) {
        os << std::left << std::setw(12) << list.label;
        for (const auto& [id, score] : list.ranked) os << std::right << std::setw(6) << id;
        os << '\n';
    }
    return os.str();
}

}  // namespace mfrec
