#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "mfrec/dataio.hpp"
#include "mfrec/model.hpp"
#include "mfrec/rng.hpp"

namespace mfrec {

struct TrainDiverged : std::runtime_error {
    TrainDiverged(double gamma, double lambda, int epoch);
    TrainDiverged(const std::string& message, double gamma, double lambda, int epoch);
    double gamma;
    double lambda;
    int epoch;
};

struct TrainState {
    explicit TrainState(std::uint64_t seed);

    int epoch = 0;
    std::vector<double> train_loss_history;
    std::vector<double> train_rmse_history;
    std::vector<double> valid_rmse_history;  // empty when no validation set
    std::vector<double> epoch_seconds;
    Rng shuffle_rng;
};

// Regularized squared-error objective with per-rating regularization
// scope: every observed (u,i) contributes its own squared error plus
// lambda times the squared norms of exactly the parameters its SGD step
// touches. Inactive term families contribute nothing.
double loss(const Model& model, const Dataset& train);

// Squared-error and RMSE in one pass; loss = sse + lambda * reg.
struct LossParts {
    double sse = 0.0;
    double reg = 0.0;
    std::size_t count = 0;
};
LossParts loss_parts(const Model& model, const Dataset& train);

// One SGD step for a single observed rating. Reads all composites at the
// current point, then writes, so every update is a function of the
// pre-step state. Throws TrainDiverged when the error is not finite.
void sgd_update(Model& model, const Dataset::Entry& entry, int epoch);

// One seeded-shuffle pass over the training ratings.
void sgd_epoch(Model& model, const Dataset& train, TrainState& state);

struct FitOptions {
    const Dataset* valid = nullptr;  // per-epoch validation RMSE when set
    std::ostream* log = nullptr;     // one CSV line per epoch when set
    bool track_metrics = true;       // per-epoch loss/RMSE histories
};

struct FitResult {
    Model model;
    TrainState state;
};

// Initializes from hp and runs hp.epochs SGD passes over `train`,
// recording per-epoch loss / train RMSE (and validation RMSE when
// supplied). epochs == 0 returns the initialized model untouched.
FitResult fit(const HyperParams& hp, const Dataset& train, const FitOptions& opts = {});

// Header for the per-epoch log lines written by fit().
extern const char* const kEpochLogHeader;

}  // namespace mfrec
