#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfrec/features.hpp"

namespace mfrec {

// Anything wrong with input files or identifiers.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One (user, item, rating, timestamp) interaction, external ids.
struct RatingRecord {
    std::int64_t user_id;
    std::int64_t item_id;
    int rating;              // 1..5
    std::int64_t timestamp;  // unix seconds
};

enum class Gender : std::uint8_t { M, F };

struct UserProfile {
    std::int64_t user_id;
    int age;  // >= 1; ml-1m stores the cohort codes {1,18,25,35,45,50,56}
    Gender gender;
    std::string occupation;
    std::string zip;
};

struct ItemProfile {
    std::int64_t item_id;
    std::string title;  // raw bytes, never parsed
    std::vector<std::uint8_t> genre_flags;  // length == vocabulary size
};

enum class Flavor { Ml100k, Ml1m, Synthetic };

// Per-corpus tables shared by every split of the same load: profiles,
// the genre vocabulary and the dense re-indexing of external ids.
// Immutable once built.
struct Tables {
    Flavor flavor = Flavor::Synthetic;
    std::string name;  // "ml-100k", "ml-1m", ...
    GenreVocabulary vocab;
    std::vector<UserProfile> users;  // dense user order
    std::vector<ItemProfile> items;  // dense item order
    std::unordered_map<std::int64_t, std::int32_t> user_index;
    std::unordered_map<std::int64_t, std::int32_t> item_index;

    std::int32_t user_dense(std::int64_t external_id) const;  // throws DataError
    std::int32_t item_dense(std::int64_t external_id) const;
};

std::shared_ptr<const Tables> make_tables(Flavor flavor, std::string name,
                                          GenreVocabulary vocab,
                                          std::vector<UserProfile> users,
                                          std::vector<ItemProfile> items);

// Indexed, immutable rating collection. A split produces two Datasets
// sharing the parent's Tables, each with its own rating list and its own
// per-user rated-item sets, so implicit feedback computed on a training
// view can never see test interactions.
class Dataset {
public:
    struct Entry {
        std::int32_t user;  // dense
        std::int32_t item;  // dense
        double rating;
    };

    static Dataset from_parts(std::shared_ptr<const Tables> tables,
                              std::vector<RatingRecord> ratings,
                              std::vector<std::string> warnings = {});

    const Tables& tables() const { return *tables_; }
    std::shared_ptr<const Tables> tables_ptr() const { return tables_; }

    int num_users() const { return static_cast<int>(tables_->users.size()); }
    int num_items() const { return static_cast<int>(tables_->items.size()); }
    std::size_t num_ratings() const { return ratings_.size(); }

    double mean_rating() const { return mean_; }
    // 1 - |ratings| / (m * n)
    double sparsity() const;

    const std::vector<RatingRecord>& ratings() const { return ratings_; }
    const std::vector<Entry>& entries() const { return entries_; }

    // N(u): dense item indices rated by each dense user, ascending.
    const std::vector<std::vector<std::int32_t>>& rated_items() const { return rated_items_; }

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    Dataset() = default;

    std::shared_ptr<const Tables> tables_;
    std::vector<RatingRecord> ratings_;
    std::vector<Entry> entries_;
    std::vector<std::vector<std::int32_t>> rated_items_;
    std::vector<std::string> warnings_;
    double mean_ = 0.0;
};

struct Split {
    Dataset train;
    Dataset test;
    double ratio;
    std::uint64_t seed;
};

// u.data / u.item / u.user, tab- and pipe-separated.
Dataset load_ml100k(const std::filesystem::path& dir);

// ratings.dat / movies.dat / users.dat, "::"-separated. Movies never
// referenced by a rating are dropped from the dense index, which is why
// the corpus counts 3706 items out of 3883 catalogue rows.
Dataset load_ml1m(const std::filesystem::path& dir);

// Detects the flavor from the files present in `dir`.
Dataset load_auto(const std::filesystem::path& dir);

// Exact shuffle-then-cut split: |train| = round(ratio * total), clamped so
// both sides are non-empty. Deterministic in (dataset order, ratio, seed).
Split random_split(const Dataset& ds, double ratio, std::uint64_t seed);

}  // namespace mfrec
