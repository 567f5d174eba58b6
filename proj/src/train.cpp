#include "mfrec/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace mfrec {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ULL;

struct Scratch {
    std::vector<double> user_vec;
    std::vector<double> item_vec;
    void ensure(int k) {
        user_vec.resize(static_cast<std::size_t>(k));
        item_vec.resize(static_cast<std::size_t>(k));
    }
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

}  // namespace

TrainDiverged::TrainDiverged(double g, double l, int e)
    : std::runtime_error("training diverged at epoch " + std::to_string(e) +
                         " (gamma=" + std::to_string(g) + ", lambda=" + std::to_string(l) + ")"),
      gamma(g), lambda(l), epoch(e) {}

TrainDiverged::TrainDiverged(const std::string& message, double g, double l, int e)
    : std::runtime_error(message), gamma(g), lambda(l), epoch(e) {}

TrainState::TrainState(std::uint64_t seed) : shuffle_rng(seed) {}

const char* const kEpochLogHeader = "epoch,train_loss,train_rmse,valid_rmse,seconds";

void sgd_update(Model& model, const Dataset::Entry& entry, int epoch) {
    const int k = model.hp.k;
    Scratch& s = scratch();
    s.ensure(k);
    std::span<double> user_vec(s.user_vec);
    std::span<double> item_vec(s.item_vec);

    const std::int32_t u = entry.user;
    const std::int32_t i = entry.item;

    // All composites are read at the current point before any write, so
    // every update below is a function of the pre-step state.
    model.compose_user(u, user_vec);
    model.compose_item(i, item_vec);

    ModelParams& p = model.params;
    double pred = 0.0;
    for (int d = 0; d < k; ++d) pred += user_vec[static_cast<std::size_t>(d)] * item_vec[static_cast<std::size_t>(d)];
    if (model.use_bias())
        pred += p.mu + p.b_user[static_cast<std::size_t>(u)] + p.b_item[static_cast<std::size_t>(i)];

    const double err = entry.rating - pred;
    if (!std::isfinite(err)) throw TrainDiverged(model.hp.gamma, model.hp.lambda, epoch);

    const double gamma = model.hp.gamma;
    const double lambda = model.hp.lambda;

    if (model.use_bias()) {
        double& bu = p.b_user[static_cast<std::size_t>(u)];
        double& bi = p.b_item[static_cast<std::size_t>(i)];
        bu += gamma * (err - lambda * bu);
        bi += gamma * (err - lambda * bi);
    }

    {
        auto pu = p.P.row(u);
        auto qi = p.Q.row(i);
        for (int d = 0; d < k; ++d) {
            const auto dd = static_cast<std::size_t>(d);
            pu[dd] += gamma * (err * item_vec[dd] - lambda * pu[dd]);
            qi[dd] += gamma * (err * user_vec[dd] - lambda * qi[dd]);
        }
    }

    if (model.use_age()) {
        const double w = err * model.hp.alpha * model.age_norm(u);
        for (std::int32_t a : model.user_attrs[static_cast<std::size_t>(u)]) {
            auto ya = p.Y_age.row(a);
            for (int d = 0; d < k; ++d) {
                const auto dd = static_cast<std::size_t>(d);
                ya[dd] += gamma * (w * item_vec[dd] - lambda * ya[dd]);
            }
        }
    }

    if (model.use_impl()) {
        const double w = err * model.hp.beta * model.impl_scale(u);
        for (std::int32_t j : model.user_items[static_cast<std::size_t>(u)]) {
            auto yj = p.Y_impl.row(j);
            for (int d = 0; d < k; ++d) {
                const auto dd = static_cast<std::size_t>(d);
                yj[dd] += gamma * (w * item_vec[dd] - lambda * yj[dd]);
            }
        }
    }

    if (model.use_genre()) {
        const double w = err * model.genre_norm(i);
        for (std::int32_t t : model.item_attrs[static_cast<std::size_t>(i)]) {
            auto yt = p.Y_genre.row(t);
            for (int d = 0; d < k; ++d) {
                const auto dd = static_cast<std::size_t>(d);
                yt[dd] += gamma * (w * user_vec[dd] - lambda * yt[dd]);
            }
        }
    }
}

void sgd_epoch(Model& model, const Dataset& train, TrainState& state) {
    const auto& entries = train.entries();
    std::vector<std::int32_t> order(entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
    state.shuffle_rng.shuffle(order);
    for (std::int32_t idx : order)
        sgd_update(model, entries[static_cast<std::size_t>(idx)], state.epoch);
    ++state.epoch;
}

LossParts loss_parts(const Model& model, const Dataset& train) {
    const ModelParams& p = model.params;
    const int users = model.num_users();
    const int items = model.num_items();

    auto row_norm2 = [&](const Mat& mat, int r) {
        double s = 0.0;
        for (double v : mat.row(r)) s += v * v;
        return s;
    };

    std::vector<double> pu_norm2(static_cast<std::size_t>(users));
    std::vector<double> qi_norm2(static_cast<std::size_t>(items));
    for (int u = 0; u < users; ++u) pu_norm2[static_cast<std::size_t>(u)] = row_norm2(p.P, u);
    for (int i = 0; i < items; ++i) qi_norm2[static_cast<std::size_t>(i)] = row_norm2(p.Q, i);

    // per-rating regularization scope, precomputed per entity
    std::vector<double> impl_sum(static_cast<std::size_t>(users), 0.0);
    if (model.use_impl()) {
        std::vector<double> yj_norm2(static_cast<std::size_t>(items));
        for (int i = 0; i < items; ++i) yj_norm2[static_cast<std::size_t>(i)] = row_norm2(p.Y_impl, i);
        for (int u = 0; u < users; ++u)
            for (std::int32_t j : model.user_items[static_cast<std::size_t>(u)])
                impl_sum[static_cast<std::size_t>(u)] += yj_norm2[static_cast<std::size_t>(j)];
    }
    std::vector<double> age_sum(static_cast<std::size_t>(users), 0.0);
    if (model.use_age()) {
        std::vector<double> ya_norm2(kAgeBucketCount);
        for (int a = 0; a < kAgeBucketCount; ++a) ya_norm2[static_cast<std::size_t>(a)] = row_norm2(p.Y_age, a);
        for (int u = 0; u < users; ++u)
            for (std::int32_t a : model.user_attrs[static_cast<std::size_t>(u)])
                age_sum[static_cast<std::size_t>(u)] += ya_norm2[static_cast<std::size_t>(a)];
    }
    std::vector<double> genre_sum(static_cast<std::size_t>(items), 0.0);
    if (model.use_genre()) {
        std::vector<double> yt_norm2(static_cast<std::size_t>(model.vocab.size()));
        for (int t = 0; t < model.vocab.size(); ++t) yt_norm2[static_cast<std::size_t>(t)] = row_norm2(p.Y_genre, t);
        for (int i = 0; i < items; ++i)
            for (std::int32_t t : model.item_attrs[static_cast<std::size_t>(i)])
                genre_sum[static_cast<std::size_t>(i)] += yt_norm2[static_cast<std::size_t>(t)];
    }

    LossParts parts;
    for (const Dataset::Entry& e : train.entries()) {
        const double err = e.rating - model.predict_raw(e.user, e.item);
        parts.sse += err * err;
        double z = pu_norm2[static_cast<std::size_t>(e.user)] + qi_norm2[static_cast<std::size_t>(e.item)];
        if (model.use_bias()) {
            const double bu = p.b_user[static_cast<std::size_t>(e.user)];
            const double bi = p.b_item[static_cast<std::size_t>(e.item)];
            z += bu * bu + bi * bi;
        }
        z += age_sum[static_cast<std::size_t>(e.user)] + impl_sum[static_cast<std::size_t>(e.user)] +
             genre_sum[static_cast<std::size_t>(e.item)];
        parts.reg += z;
        ++parts.count;
    }
    return parts;
}

double loss(const Model& model, const Dataset& train) {
    const LossParts parts = loss_parts(model, train);
    return parts.sse + model.hp.lambda * parts.reg;
}

namespace {

double dataset_rmse(const Model& model, const Dataset& ds) {
    double sse = 0.0;
    for (const Dataset::Entry& e : ds.entries()) {
        const double err = e.rating - model.predict_raw(e.user, e.item);
        sse += err * err;
    }
    return ds.entries().empty() ? 0.0 : std::sqrt(sse / static_cast<double>(ds.entries().size()));
}

}  // namespace

FitResult fit(const HyperParams& hp, const Dataset& train, const FitOptions& opts) {
    Model model = make_model(hp, train);
    TrainState state(hp.seed ^ kShuffleSalt);

    if (opts.log) *opts.log << kEpochLogHeader << '\n';

    const bool track = opts.track_metrics || opts.log != nullptr;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        sgd_epoch(model, train, state);
        if (!model.params.all_finite()) throw TrainDiverged(hp.gamma, hp.lambda, epoch);

        double train_loss = 0.0, train_rmse = 0.0;
        if (track) {
            const LossParts parts = loss_parts(model, train);
            train_loss = parts.sse + hp.lambda * parts.reg;
            train_rmse =
                parts.count == 0 ? 0.0 : std::sqrt(parts.sse / static_cast<double>(parts.count));
            state.train_loss_history.push_back(train_loss);
            state.train_rmse_history.push_back(train_rmse);
        }

        double valid_rmse = 0.0;
        if (opts.valid) {
            valid_rmse = dataset_rmse(model, *opts.valid);
            state.valid_rmse_history.push_back(valid_rmse);
        }

        const auto t1 = std::chrono::steady_clock::now();
        const double seconds = std::chrono::duration<double>(t1 - t0).count();
        state.epoch_seconds.push_back(seconds);

        if (opts.log) {
            *opts.log << epoch << ',' << train_loss << ',' << train_rmse << ',';
            if (opts.valid) *opts.log << valid_rmse;
            *opts.log << ',' << seconds << '\n';
        }
    }
    return FitResult{std::move(model), std::move(state)};
}

}  // namespace mfrec
