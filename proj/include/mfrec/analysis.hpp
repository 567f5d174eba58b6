#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "mfrec/dataio.hpp"

namespace mfrec {

// popularity = (grade/2 + unums/2) * 100, where grade is the item's share
// of the total rating mass and unums its share of the rating count.
struct PopularityEntry {
    std::int64_t item_id;
    std::string title;
    double grade;
    double unums;
    double popularity;  // percent
};

// One entry per item, sorted by popularity descending, item id ascending
// on ties.
std::vector<PopularityEntry> popularity_table(const Dataset& ds);

enum class CohortRank { Sum, Count, Mean };
const char* to_string(CohortRank r);
CohortRank cohort_rank_from_string(const std::string& s);

struct CohortTopList {
    std::string label;  // cohort description
    std::vector<std::pair<std::int64_t, double>> ranked;  // (external item id, score)
};

// Top-n items among users of one age cohort, ranked by the given
// criterion over the cohort's ratings (default: sum of rating values).
// Ties break on ascending item id; `exclude` removes items before
// truncation. An empty cohort yields an empty list and a stderr warning.
CohortTopList cohort_top(const Dataset& ds, int bucket, int n,
                         const std::set<std::int64_t>& exclude = {},
                         CohortRank rank = CohortRank::Sum);

// Same ranking over the union of several cohorts (e.g. buckets {0,1,2}).
CohortTopList cohort_top_merged(const Dataset& ds, const std::vector<int>& buckets, int n,
                                const std::set<std::int64_t>& exclude = {},
                                CohortRank rank = CohortRank::Sum);

struct OverlapResult {
    std::vector<std::vector<int>> pairwise;  // |lists| x |lists| intersection sizes
    std::vector<std::int64_t> common;        // intersection across all lists, ascending
};

OverlapResult cohort_overlap(const std::vector<CohortTopList>& lists);

struct Demographics {
    std::vector<std::pair<std::string, std::size_t>> gender_counts;  // "M", "F"
    std::vector<std::pair<std::string, std::size_t>> age_counts;     // 7 cohort labels
    std::size_t total_users = 0;
};

Demographics demographics(const Dataset& ds);

void write_popularity_csv(std::ostream& os, const std::vector<PopularityEntry>& table);
void write_cohort_csv(std::ostream& os, const std::vector<CohortTopList>& lists);
void write_overlap_csv(std::ostream& os, const std::vector<CohortTopList>& lists,
                       const OverlapResult& overlap);
void write_common_csv(std::ostream& os, const OverlapResult& overlap);
void write_demographics_csv(std::ostream& os, const Demographics& d);

std::string render_popularity_table(const std::vector<PopularityEntry>& table, int top_n);
std::string render_cohort_table(const std::vector<CohortTopList>& lists);

}  // namespace mfrec
