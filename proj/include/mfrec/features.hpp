#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mfrec {

// Seven age cohorts: <18, 18-24, 25-34, 35-44, 45-49, 50-55, 56+.
// Boundary ages go to the higher cohort, so the ml-1m age codes
// {1,18,25,35,45,50,56} each land in their own cohort.
inline constexpr int kAgeBucketCount = 7;

enum class AgeEncoding { OneHot, Cumulative };

const char* to_string(AgeEncoding mode);
AgeEncoding age_encoding_from_string(const std::string& s);  // throws std::invalid_argument

// Cohort index in [0,6] for an age in years. Throws std::invalid_argument
// for age < 1.
int age_to_bucket(int age);

const std::string& age_bucket_label(int bucket);

// Length-7 bit vector for a cohort: one-hot sets only `bucket`,
// cumulative sets every position up to and including it.
std::vector<std::uint8_t> encode_age(int bucket, AgeEncoding mode);

// Attribute indices whose latent vectors are averaged into the user-side
// age profile: {b} for one-hot, the prefix {0..b} for cumulative.
std::vector<std::int32_t> active_age_attributes(int age, AgeEncoding mode);

// Indices of the set genre flags; empty when no flag is set (the genre
// profile of such an item is the zero vector).
std::vector<std::int32_t> active_genre_attributes(const std::vector<std::uint8_t>& flags);

struct GenreVocabulary {
    std::vector<std::string> names;

    int size() const { return static_cast<int>(names.size()); }
    // -1 when the name is not in the vocabulary
    int index_of(const std::string& name) const;
};

// ml-100k: the 19 flag columns of u.item, "unknown" included as a genuine
// attribute with its own learnable vector.
GenreVocabulary ml100k_genres();

// ml-1m: the 18 named genres of movies.dat.
GenreVocabulary ml1m_genres();

}  // namespace mfrec
