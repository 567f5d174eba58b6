#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "mfrec/dataio.hpp"
#include "mfrec/model.hpp"

namespace mfrec {

// pairs are (observed, predicted); both throw std::invalid_argument on empty input
double rmse(const std::vector<std::pair<double, double>>& pairs);
double mae(const std::vector<std::pair<double, double>>& pairs);

// (baseline - ours) / baseline
double improvement_rate(double baseline, double ours);

// Predictions for every rating of `test`, using the model's stored
// training-split context for implicit feedback.
std::vector<std::pair<double, double>> score_pairs(const Model& model, const Dataset& test,
                                                   bool clamp);

struct RepeatRow {
    std::uint64_t seed;
    double rmse;
    double mae;
    std::size_t test_size;
};

struct EvalReport {
    std::string dataset;
    Variant variant = Variant::UISVDpp;
    double train_ratio = 0.8;
    int repeats = 0;
    bool clamped = false;
    std::vector<RepeatRow> per_repeat;
    double mean_rmse = 0.0;
    double mean_mae = 0.0;
    double std_rmse = 0.0;  // sample stddev; 0 for a single repeat
};

struct ExperimentOptions {
    double ratio = 0.8;
    int repeats = 5;
    std::uint64_t base_seed = 1;
    bool clamp = false;
    int jobs = 1;                     // parallelism across repeats only
    std::ostream* progress = nullptr; // one line per finished repeat
};

// Repeated random-subsampling protocol: repeat r splits with seed
// base_seed + r, fits on the train side (fit seed = split seed) and
// scores the held-out side. Any diverged repeat fails the experiment
// with the offending seed named.
EvalReport run_experiment(const Dataset& full, Variant variant, HyperParams hp,
                          const ExperimentOptions& opts);

inline const std::vector<Variant> kAblationVariants = {
    Variant::SVDpp, Variant::USVDpp, Variant::ISVDpp, Variant::UISVDpp};

// Same protocol with the splits shared across variants, so per-repeat
// test sets are identical and differences are attributable to the
// variant alone.
std::vector<EvalReport> run_ablation(const Dataset& full, HyperParams hp,
                                     const ExperimentOptions& opts,
                                     const std::vector<Variant>& variants = kAblationVariants);

enum class SweepAxis { Lambda, K, Epochs };
const char* to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepPoint {
    double value;
    EvalReport report;
};

// One full experiment per value, everything else held at `base`.
std::vector<SweepPoint> sweep(const Dataset& full, Variant variant, HyperParams base,
                              SweepAxis axis, const std::vector<double>& values,
                              const ExperimentOptions& opts);

// Previously published comparison numbers (methods we do not reproduce),
// loaded from a CSV with header method,dataset,ratio,rmse.
struct PublishedRow {
    std::string method;
    std::string dataset;
    double ratio;
    double rmse;
};
std::vector<PublishedRow> load_published(const std::filesystem::path& csv);

// CSV emission: per-repeat rows followed by aggregate rows.
void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports);
void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepPoint>& points);

// Aligned-text tables.
std::string render_report_table(const std::vector<EvalReport>& reports);
std::string render_comparison_table(const std::vector<EvalReport>& ours,
                                    const std::vector<PublishedRow>& published);

}  // namespace mfrec
