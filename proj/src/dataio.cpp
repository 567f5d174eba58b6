#include "mfrec/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "mfrec/rng.hpp"

namespace mfrec {

namespace {

std::string loc(const std::filesystem::path& file, std::size_t line_no) {
    return file.filename().string() + ":" + std::to_string(line_no);
}

std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string> split_on_str(const std::string& line, const std::string& sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + sep.size();
    }
}

std::int64_t parse_i64(const std::string& field, const std::string& where, const char* what) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(field, &used);
    } catch (const std::exception&) {
        throw DataError(where + ": malformed " + what + " '" + field + "'");
    }
    if (used != field.size())
        throw DataError(where + ": malformed " + what + " '" + field + "'");
    return v;
}

int parse_int(const std::string& field, const std::string& where, const char* what) {
    return static_cast<int>(parse_i64(field, where, what));
}

// Reads all non-empty lines, stripping a trailing '\r' so CRLF copies of
// the corpora parse identically.
std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("missing file: " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

Gender parse_gender(const std::string& field, const std::string& where) {
    if (field == "M") return Gender::M;
    if (field == "F") return Gender::F;
    throw DataError(where + ": malformed gender '" + field + "'");
}

void check_rating_record(const RatingRecord& r, const std::string& where) {
    if (r.user_id < 1) throw DataError(where + ": user id must be >= 1");
    if (r.item_id < 1) throw DataError(where + ": item id must be >= 1");
    if (r.rating < 1 || r.rating > 5)
        throw DataError(where + ": rating outside [1,5]: " + std::to_string(r.rating));
}

// keep-last on duplicate (user,item) pairs; the record stays at its first
// position with the later values
void dedupe_ratings(std::vector<RatingRecord>& ratings, std::vector<std::string>& warnings) {
    struct PairHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const {
            return std::hash<std::int64_t>()(p.first * 1000003 + p.second);
        }
    };
    std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::size_t, PairHash> seen;
    seen.reserve(ratings.size());
    std::vector<RatingRecord> unique;
    unique.reserve(ratings.size());
    std::size_t dups = 0;
    for (const RatingRecord& r : ratings) {
        auto key = std::make_pair(r.user_id, r.item_id);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, unique.size());
            unique.push_back(r);
        } else {
            unique[it->second] = r;
            ++dups;
            if (dups <= 10)
                warnings.push_back("duplicate rating for user " + std::to_string(r.user_id) +
                                   ", item " + std::to_string(r.item_id) + ": keeping last");
        }
    }
    if (dups > 10)
        warnings.push_back(std::to_string(dups) + " duplicate (user,item) pairs total");
    ratings = std::move(unique);
}

// Items never referenced by a rating carry no signal and are dropped from
// the dense index; this is what makes the ml-1m corpus count 3706 items.
std::vector<ItemProfile> keep_rated_items(std::vector<ItemProfile> items,
                                          const std::vector<RatingRecord>& ratings,
                                          std::vector<std::string>& warnings) {
    std::unordered_set<std::int64_t> rated;
    rated.reserve(items.size());
    for (const RatingRecord& r : ratings) rated.insert(r.item_id);
    std::size_t before = items.size();
    std::erase_if(items, [&](const ItemProfile& p) { return !rated.count(p.item_id); });
    if (items.size() != before)
        warnings.push_back(std::to_string(before - items.size()) +
                           " catalogue item(s) have no ratings and were dropped");
    return items;
}

}  // namespace

std::int32_t Tables::user_dense(std::int64_t external_id) const {
    auto it = user_index.find(external_id);
    if (it == user_index.end())
        throw DataError("unknown user id " + std::to_string(external_id));
    return it->second;
}

std::int32_t Tables::item_dense(std::int64_t external_id) const {
    auto it = item_index.find(external_id);
    if (it == item_index.end())
        throw DataError("unknown item id " + std::to_string(external_id));
    return it->second;
}

std::shared_ptr<const Tables> make_tables(Flavor flavor, std::string name,
                                          GenreVocabulary vocab,
                                          std::vector<UserProfile> users,
                                          std::vector<ItemProfile> items) {
    auto t = std::make_shared<Tables>();
    t->flavor = flavor;
    t->name = std::move(name);
    t->vocab = std::move(vocab);
    t->users = std::move(users);
    t->items = std::move(items);
    t->user_index.reserve(t->users.size());
    t->item_index.reserve(t->items.size());
    for (std::size_t i = 0; i < t->users.size(); ++i) {
        if (t->users[i].age < 1)
            throw DataError("user " + std::to_string(t->users[i].user_id) + ": age must be >= 1");
        if (!t->user_index.emplace(t->users[i].user_id, static_cast<std::int32_t>(i)).second)
            throw DataError("duplicate user id " + std::to_string(t->users[i].user_id));
    }
    for (std::size_t i = 0; i < t->items.size(); ++i) {
        if (t->items[i].genre_flags.size() != static_cast<std::size_t>(t->vocab.size()))
            throw DataError("item " + std::to_string(t->items[i].item_id) +
                            ": genre flag count does not match vocabulary");
        if (!t->item_index.emplace(t->items[i].item_id, static_cast<std::int32_t>(i)).second)
            throw DataError("duplicate item id " + std::to_string(t->items[i].item_id));
    }
    return t;
}

Dataset Dataset::from_parts(std::shared_ptr<const Tables> tables,
                            std::vector<RatingRecord> ratings,
                            std::vector<std::string> warnings) {
    Dataset ds;
    ds.tables_ = std::move(tables);
    ds.ratings_ = std::move(ratings);
    ds.warnings_ = std::move(warnings);
    ds.entries_.reserve(ds.ratings_.size());
    ds.rated_items_.assign(ds.tables_->users.size(), {});
    double sum = 0.0;
    for (const RatingRecord& r : ds.ratings_) {
        Entry e{ds.tables_->user_dense(r.user_id), ds.tables_->item_dense(r.item_id),
                static_cast<double>(r.rating)};
        ds.entries_.push_back(e);
        ds.rated_items_[static_cast<std::size_t>(e.user)].push_back(e.item);
        sum += e.rating;
    }
    for (auto& items : ds.rated_items_) std::sort(items.begin(), items.end());
    ds.mean_ = ds.ratings_.empty() ? 0.0 : sum / static_cast<double>(ds.ratings_.size());
    return ds;
}

double Dataset::sparsity() const {
    const double cells = static_cast<double>(num_users()) * static_cast<double>(num_items());
    if (cells == 0.0) return 0.0;
    return 1.0 - static_cast<double>(num_ratings()) / cells;
}

Dataset load_ml100k(const std::filesystem::path& dir) {
    const GenreVocabulary vocab = ml100k_genres();
    std::vector<std::string> warnings;

    // u.user: id|age|gender|occupation|zip
    std::vector<UserProfile> users;
    {
        const auto file = dir / "u.user";
        std::size_t line_no = 0;
        for (const std::string& line : read_lines(file)) {
            ++line_no;
            const auto f = split_on(line, '|');
            if (f.size() != 5) throw DataError(loc(file, line_no) + ": expected 5 fields");
            UserProfile u;
            u.user_id = parse_i64(f[0], loc(file, line_no), "user id");
            u.age = parse_int(f[1], loc(file, line_no), "age");
            if (u.age < 1) throw DataError(loc(file, line_no) + ": age must be >= 1");
            u.gender = parse_gender(f[2], loc(file, line_no));
            u.occupation = f[3];
            u.zip = f[4];
            users.push_back(std::move(u));
        }
        if (users.empty()) throw DataError("no users in " + file.string());
    }

    // u.item: id|title|release|video release|url|19 genre flags
    std::vector<ItemProfile> items;
    {
        const auto file = dir / "u.item";
        std::size_t line_no = 0;
        for (const std::string& line : read_lines(file)) {
            ++line_no;
            const auto f = split_on(line, '|');
            if (f.size() != 5 + static_cast<std::size_t>(vocab.size()))
                throw DataError(loc(file, line_no) + ": expected " +
                                std::to_string(5 + vocab.size()) + " fields, got " +
                                std::to_string(f.size()));
            ItemProfile p;
            p.item_id = parse_i64(f[0], loc(file, line_no), "item id");
            p.title = f[1];
            p.genre_flags.reserve(static_cast<std::size_t>(vocab.size()));
            bool any = false;
            for (int g = 0; g < vocab.size(); ++g) {
                const std::string& flag = f[static_cast<std::size_t>(5 + g)];
                if (flag != "0" && flag != "1")
                    throw DataError(loc(file, line_no) + ": malformed genre flag '" + flag + "'");
                p.genre_flags.push_back(flag == "1" ? 1 : 0);
                any = any || flag == "1";
            }
            if (!any)
                warnings.push_back("item " + std::to_string(p.item_id) + " has no genre flags");
            items.push_back(std::move(p));
        }
        if (items.empty()) throw DataError("no items in " + file.string());
    }

    // u.data: user \t item \t rating \t timestamp
    std::vector<RatingRecord> ratings;
    {
        const auto file = dir / "u.data";
        std::size_t line_no = 0;
        for (const std::string& line : read_lines(file)) {
            ++line_no;
            const auto f = split_on(line, '\t');
            if (f.size() != 4) throw DataError(loc(file, line_no) + ": expected 4 fields");
            RatingRecord r;
            r.user_id = parse_i64(f[0], loc(file, line_no), "user id");
            r.item_id = parse_i64(f[1], loc(file, line_no), "item id");
            r.rating = parse_int(f[2], loc(file, line_no), "rating");
            r.timestamp = parse_i64(f[3], loc(file, line_no), "timestamp");
            check_rating_record(r, loc(file, line_no));
            ratings.push_back(r);
        }
        if (ratings.empty()) throw DataError("no ratings in " + file.string());
    }

    dedupe_ratings(ratings, warnings);

    // ids must resolve against the profile tables
    {
        std::unordered_set<std::int64_t> known_users, known_items;
        for (const auto& u : users) known_users.insert(u.user_id);
        for (const auto& p : items) known_items.insert(p.item_id);
        for (const RatingRecord& r : ratings) {
            if (!known_users.count(r.user_id))
                throw DataError("u.data references user " + std::to_string(r.user_id) +
                                " absent from u.user");
            if (!known_items.count(r.item_id))
                throw DataError("u.data references item " + std::to_string(r.item_id) +
                                " absent from u.item");
        }
    }

    items = keep_rated_items(std::move(items), ratings, warnings);
    auto tables = make_tables(Flavor::Ml100k, "ml-100k", vocab, std::move(users), std::move(items));
    return Dataset::from_parts(std::move(tables), std::move(ratings), std::move(warnings));
}

Dataset load_ml1m(const std::filesystem::path& dir) {
    const GenreVocabulary vocab = ml1m_genres();
    std::vector<std::string> warnings;

    // users.dat: UserID::Gender::Age::Occupation::Zip-code
    std::vector<UserProfile> users;
    {
        const auto file = dir / "users.dat";
        std::size_t line_no = 0;
        for (const std::string& line : read_lines(file)) {
            ++line_no;
            const auto f = split_on_str(line, "::");
            if (f.size() != 5) throw DataError(loc(file, line_no) + ": expected 5 fields");
            UserProfile u;
            u.user_id = parse_i64(f[0], loc(file, line_no), "user id");
            u.gender = parse_gender(f[1], loc(file, line_no));
            u.age = parse_int(f[2], loc(file, line_no), "age");  // cohort code, e.g. 25
            if (u.age < 1) throw DataError(loc(file, line_no) + ": age must be >= 1");
            u.occupation = f[3];
            u.zip = f[4];
            users.push_back(std::move(u));
        }
        if (users.empty()) throw DataError("no users in " + file.string());
    }

    // movies.dat: MovieID::Title::Genre|Genre|...
    std::vector<ItemProfile> items;
    {
        const auto file = dir / "movies.dat";
        std::size_t line_no = 0;
        for (const std::string& line : read_lines(file)) {
            ++line_no;
            const auto f = split_on_str(line, "::");
            if (f.size() != 3) throw DataError(loc(file, line_no) + ": expected 3 fields");
            ItemProfile p;
            p.item_id = parse_i64(f[0], loc(file, line_no), "item id");
            p.title = f[1];
            p.genre_flags.assign(static_cast<std::size_t>(vocab.size()), 0);
            for (const std::string& name : split_on(f[2], '|')) {
                if (name.empty()) continue;
                const int idx = vocab.index_of(name);
                if (idx < 0)
                    throw DataError(loc(file, line_no) + ": unknown genre '" + name + "'");
                p.genre_flags[static_cast<std::size_t>(idx)] = 1;
            }
            if (std::count(p.genre_flags.begin(), p.genre_flags.end(), 1) == 0)
                warnings.push_back("item " + std::to_string(p.item_id) + " has no genre flags");
            items.push_back(std::move(p));
        }
        if (items.empty()) throw DataError("no items in " + file.string());
    }

    // ratings.dat: UserID::MovieID::Rating::Timestamp
    std::vector<RatingRecord> ratings;
    {
        const auto file = dir / "ratings.dat";
        std::size_t line_no = 0;
        for (const std::string& line : read_lines(file)) {
            ++line_no;
            const auto f = split_on_str(line, "::");
            if (f.size() != 4) throw DataError(loc(file, line_no) + ": expected 4 fields");
            RatingRecord r;
            r.user_id = parse_i64(f[0], loc(file, line_no), "user id");
            r.item_id = parse_i64(f[1], loc(file, line_no), "item id");
            r.rating = parse_int(f[2], loc(file, line_no), "rating");
            r.timestamp = parse_i64(f[3], loc(file, line_no), "timestamp");
            check_rating_record(r, loc(file, line_no));
            ratings.push_back(r);
        }
        if (ratings.empty()) throw DataError("no ratings in " + file.string());
    }

    dedupe_ratings(ratings, warnings);

    {
        std::unordered_set<std::int64_t> known_users, known_items;
        for (const auto& u : users) known_users.insert(u.user_id);
        for (const auto& p : items) known_items.insert(p.item_id);
        for (const RatingRecord& r : ratings) {
            if (!known_users.count(r.user_id))
                throw DataError("ratings.dat references user " + std::to_string(r.user_id) +
                                " absent from users.dat");
            if (!known_items.count(r.item_id))
                throw DataError("ratings.dat references movie " + std::to_string(r.item_id) +
                                " absent from movies.dat");
        }
    }

    items = keep_rated_items(std::move(items), ratings, warnings);
    auto tables = make_tables(Flavor::Ml1m, "ml-1m", vocab, std::move(users), std::move(items));
    return Dataset::from_parts(std::move(tables), std::move(ratings), std::move(warnings));
}

Dataset load_auto(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (fs::exists(dir / "u.data")) return load_ml100k(dir);
    if (fs::exists(dir / "ratings.dat")) return load_ml1m(dir);
    throw DataError("no MovieLens files found in " + dir.string() +
                    " (expected u.data or ratings.dat)");
}

Split random_split(const Dataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split ratio must be in (0,1), got " + std::to_string(ratio));
    const std::size_t total = ds.num_ratings();
    if (total < 2) throw DataError("cannot split fewer than 2 ratings");

    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
    n_train = std::clamp<std::size_t>(n_train, 1, total - 1);

    std::vector<RatingRecord> train_records, test_records;
    train_records.reserve(n_train);
    test_records.reserve(total - n_train);
    const auto& all = ds.ratings();
    for (std::size_t i = 0; i < total; ++i) {
        (i < n_train ? train_records : test_records).push_back(all[order[i]]);
    }

    Split split{Dataset::from_parts(ds.tables_ptr(), std::move(train_records)),
                Dataset::from_parts(ds.tables_ptr(), std::move(test_records)), ratio, seed};
    return split;
}

}  // namespace mfrec
