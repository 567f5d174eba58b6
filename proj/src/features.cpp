#include "mfrec/features.hpp"

#include <array>
#include <stdexcept>

namespace mfrec {

const char* to_string(AgeEncoding mode) {
    return mode == AgeEncoding::OneHot ? "onehot" : "cumulative";
}

AgeEncoding age_encoding_from_string(const std::string& s) {
    if (s == "onehot") return AgeEncoding::OneHot;
    if (s == "cumulative") return AgeEncoding::Cumulative;
    throw std::invalid_argument("unknown age encoding: " + s);
}

int age_to_bucket(int age) {
    if (age < 1) throw std::invalid_argument("age must be >= 1, got " + std::to_string(age));
    if (age < 18) return 0;
    if (age <= 24) return 1;
    if (age <= 34) return 2;
    if (age <= 44) return 3;
    if (age <= 49) return 4;
    if (age <= 55) return 5;
    return 6;
}

const std::string& age_bucket_label(int bucket) {
    static const std::array<std::string, kAgeBucketCount> labels = {
        "<18", "18-24", "25-34", "35-44", "45-49", "50-55", "56+"};
    return labels.at(static_cast<std::size_t>(bucket));
}

std::vector<std::uint8_t> encode_age(int bucket, AgeEncoding mode) {
    if (bucket < 0 || bucket >= kAgeBucketCount)
        throw std::invalid_argument("age bucket out of range: " + std::to_string(bucket));
    std::vector<std::uint8_t> bits(kAgeBucketCount, 0);
    if (mode == AgeEncoding::OneHot) {
        bits[static_cast<std::size_t>(bucket)] = 1;
    } else {
        for (int b = 0; b <= bucket; ++b) bits[static_cast<std::size_t>(b)] = 1;
    }
    return bits;
}

std::vector<std::int32_t> active_age_attributes(int age, AgeEncoding mode) {
    const int bucket = age_to_bucket(age);
    std::vector<std::int32_t> active;
    if (mode == AgeEncoding::OneHot) {
        active.push_back(bucket);
    } else {
        active.reserve(static_cast<std::size_t>(bucket) + 1);
        for (int b = 0; b <= bucket; ++b) active.push_back(b);
    }
    return active;
}

std::vector<std::int32_t> active_genre_attributes(const std::vector<std::uint8_t>& flags) {
    std::vector<std::int32_t> active;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) active.push_back(static_cast<std::int32_t>(i));
    return active;
}

int GenreVocabulary::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

GenreVocabulary ml100k_genres() {
    return GenreVocabulary{{"unknown", "Action", "Adventure", "Animation", "Children's",
                            "Comedy", "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir",
                            "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller",
                            "War", "Western"}};
}

GenreVocabulary ml1m_genres() {
    return GenreVocabulary{{"Action", "Adventure", "Animation", "Children's", "Comedy",
                            "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
                            "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War",
                            "Western"}};
}

}  // namespace mfrec
