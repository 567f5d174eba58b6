#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfrec/dataio.hpp"
#include "mfrec/features.hpp"

namespace mfrec {

// BiasSVD   mu + b_u + b_i + p_u.q_i
// MF        p_u.q_i                        (unbiased, PMF-style MAP fit)
// SVDpp     mu + b + (p_u + beta*p_j).q_i
// USVDpp    mu + b + (p_u + alpha*p_a + beta*p_j).q_i
// ISVDpp    mu + b + (p_u + beta*p_j).(q_i + q_t)
// UISVDpp   mu + b + (p_u + alpha*p_a + beta*p_j).(q_i + q_t)
// where p_a averages age-attribute vectors, q_t averages genre-attribute
// vectors and p_j = |N(u)|^{-1/2} * sum of implicit item vectors.
enum class Variant { BiasSVD, MF, SVDpp, USVDpp, ISVDpp, UISVDpp };

// Normalizer for the attribute averages: the entity's active attribute
// count, or the global attribute count (7 age cohorts / vocabulary size).
enum class AttrNorm { Active, Global };

const char* to_string(Variant v);
const char* display_name(Variant v);  // table label, e.g. "SVD++", "PMF (MAP)"
Variant variant_from_string(const std::string& s);  // throws std::invalid_argument
const char* to_string(AttrNorm n);
AttrNorm attr_norm_from_string(const std::string& s);

struct HyperParams {
    int k = 25;            // latent dimension
    double gamma = 0.01;   // SGD step size
    double lambda = 0.1;   // L2 regularization weight
    double alpha = 0.5;    // age-term weight
    double beta = 0.5;     // implicit-term weight; alpha + beta = 1
    int epochs = 55;
    std::uint64_t seed = 42;
    Variant variant = Variant::UISVDpp;
    AgeEncoding age_encoding = AgeEncoding::OneHot;
    AttrNorm attr_norm = AttrNorm::Active;
    double init_stddev = 0.1;  // Gaussian scale for latent init; biases start at zero

    void validate() const;  // throws std::invalid_argument
};

// Row-major dense matrix; each row is one k-vector.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols)
        : rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    std::span<double> row(int i) {
        return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
    }
    std::span<const double> row(int i) const {
        return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
    bool all_finite() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// The complete learnable state.
struct ModelParams {
    double mu = 0.0;              // training-set mean; never updated by SGD
    std::vector<double> b_user;   // m
    std::vector<double> b_item;   // n
    Mat P;        // m x k user factors
    Mat Q;        // n x k item factors
    Mat Y_impl;   // n x k implicit-feedback vectors
    Mat Y_age;    // 7 x k age-attribute vectors
    Mat Y_genre;  // |F_t| x k genre-attribute vectors

    bool all_finite() const;
};

struct Prediction {
    double value;    // raw estimate
    double clamped;  // value clipped to [1,5]
};

enum class PredictionMode { Full, ColdUser, ColdItem, ColdBoth, GlobalMean };
const char* to_string(PredictionMode m);

struct ColdPrediction {
    Prediction prediction;
    PredictionMode mode;
};

struct ModelIOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A fitted (or freshly initialized) model together with everything needed
// to predict after the training data is gone: index maps, per-user age
// attributes and train-split rated-item sets, per-item genre attributes.
struct Model {
    HyperParams hp;
    ModelParams params;

    std::string dataset_name;
    GenreVocabulary vocab;
    std::vector<std::int64_t> user_ids;  // dense -> external
    std::vector<std::int64_t> item_ids;
    std::unordered_map<std::int64_t, std::int32_t> user_index;
    std::unordered_map<std::int64_t, std::int32_t> item_index;
    std::vector<std::int32_t> user_age;                    // raw ages
    std::vector<std::vector<std::uint8_t>> item_flags;     // raw genre flags
    std::vector<std::vector<std::int32_t>> user_attrs;     // derived from age + encoding
    std::vector<std::vector<std::int32_t>> item_attrs;     // derived from flags
    std::vector<std::vector<std::int32_t>> user_items;     // N(u) of the training split

    int k() const { return hp.k; }
    int num_users() const { return static_cast<int>(user_ids.size()); }
    int num_items() const { return static_cast<int>(item_ids.size()); }

    // Term activity. The age and implicit terms drop out entirely when
    // their weight is zero, so alpha=1 (beta=0) is the feature-only model
    // with no implicit feedback.
    bool use_bias() const { return hp.variant != Variant::MF; }
    bool use_impl() const {
        return (hp.variant == Variant::SVDpp || hp.variant == Variant::USVDpp ||
                hp.variant == Variant::ISVDpp || hp.variant == Variant::UISVDpp) &&
               hp.beta > 0.0;
    }
    bool use_age() const {
        return (hp.variant == Variant::USVDpp || hp.variant == Variant::UISVDpp) &&
               hp.alpha > 0.0;
    }
    bool use_genre() const {
        return hp.variant == Variant::ISVDpp || hp.variant == Variant::UISVDpp;
    }

    // 1 / normalizer of the age-attribute average for dense user u
    double age_norm(std::int32_t u) const;
    // 1 / normalizer of the genre-attribute average; 0 when the item has none
    double genre_norm(std::int32_t i) const;
    // |N(u)|^{-1/2}; 0 when N(u) is empty
    double impl_scale(std::int32_t u) const;

    // p_a, p_j, q_t (unweighted); out must have size k
    void age_profile(std::int32_t u, std::span<double> out) const;
    void implicit_profile(std::int32_t u, std::span<double> out) const;
    void genre_profile(std::int32_t i, std::span<double> out) const;

    // p_u (+ alpha*p_a) (+ beta*p_j) per variant
    void compose_user(std::int32_t u, std::span<double> out) const;
    // q_i (+ q_t) per variant
    void compose_item(std::int32_t i, std::span<double> out) const;

    double predict_raw(std::int32_t u, std::int32_t i) const;  // dense indices
    Prediction predict_dense(std::int32_t u, std::int32_t i) const;
    Prediction predict(std::int64_t user_ext, std::int64_t item_ext) const;  // throws DataError

    // Prediction with optional cold-start fallbacks: each side is resolved
    // from its external id when known, from the supplied attributes when
    // not, and contributes nothing when neither is available. Genre names
    // must be in the model's vocabulary.
    ColdPrediction predict_query(std::optional<std::int64_t> user_ext,
                                 std::optional<int> age,
                                 std::optional<std::int64_t> item_ext,
                                 const std::vector<std::string>* genre_names) const;
};

// Biases zero, mu = train mean, latent matrices ~ N(0, init_stddev^2)
// drawn from Rng(hp.seed) in declared order. All parameter blocks are
// allocated for every variant; fitting only touches the active ones.
Model make_model(const HyperParams& hp, const Dataset& train);

// Versioned single-file binary format; round-trips bit-exactly.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);  // throws ModelIOError

}  // namespace mfrec
