#include "mfrec/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "mfrec/csv.hpp"
#include "mfrec/train.hpp"

namespace mfrec {

double rmse(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("rmse of empty pair list");
    double sse = 0.0;
    for (const auto& [r, pred] : pairs) {
        const double e = r - pred;
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(pairs.size()));
}

double mae(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("mae of empty pair list");
    double sum = 0.0;
    for (const auto& [r, pred] : pairs) sum += std::abs(r - pred);
    return sum / static_cast<double>(pairs.size());
}

double improvement_rate(double baseline, double ours) {
    return (baseline - ours) / baseline;
}

std::vector<std::pair<double, double>> score_pairs(const Model& model, const Dataset& test,
                                                   bool clamp) {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(test.entries().size());
    for (const Dataset::Entry& e : test.entries()) {
        const Prediction p = model.predict_dense(e.user, e.item);
        pairs.emplace_back(e.rating, clamp ? p.clamped : p.value);
    }
    return pairs;
}

namespace {

// index-ordered parallel loop; exceptions rethrown for the lowest index
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::clamp(jobs, 1, n);
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

std::mutex progress_mutex;

void progress_line(std::ostream* os, const std::string& line) {
    if (!os) return;
    std::lock_guard<std::mutex> lock(progress_mutex);
    *os << line << std::endl;
}

void aggregate(EvalReport& report) {
    double rmse_sum = 0.0, mae_sum = 0.0;
    for (const RepeatRow& row : report.per_repeat) {
        rmse_sum += row.rmse;
        mae_sum += row.mae;
    }
    const auto n = static_cast<double>(report.per_repeat.size());
    report.mean_rmse = rmse_sum / n;
    report.mean_mae = mae_sum / n;
    if (report.per_repeat.size() > 1) {
        double sq = 0.0;
        for (const RepeatRow& row : report.per_repeat) {
            const double d = row.rmse - report.mean_rmse;
            sq += d * d;
        }
        report.std_rmse = std::sqrt(sq / (n - 1.0));
    } else {
        report.std_rmse = 0.0;
    }
}

RepeatRow run_one(const Split& split, Variant variant, HyperParams hp, bool clamp) {
    hp.variant = variant;
    hp.seed = split.seed;
    FitOptions fit_opts;
    fit_opts.track_metrics = false;
    FitResult fr = [&] {
        try {
            return fit(hp, split.train, fit_opts);
        } catch (const TrainDiverged& e) {
            throw TrainDiverged(std::string(e.what()) + " [repeat seed " +
                                    std::to_string(split.seed) + "]",
                                e.gamma, e.lambda, e.epoch);
        }
    }();
    const auto pairs = score_pairs(fr.model, split.test, clamp);
    return RepeatRow{split.seed, rmse(pairs), mae(pairs), split.test.num_ratings()};
}

}  // namespace

EvalReport run_experiment(const Dataset& full, Variant variant, HyperParams hp,
                          const ExperimentOptions& opts) {
    if (opts.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    EvalReport report;
    report.dataset = full.tables().name;
    report.variant = variant;
    report.train_ratio = opts.ratio;
    report.repeats = opts.repeats;
    report.clamped = opts.clamp;
    report.per_repeat.resize(static_cast<std::size_t>(opts.repeats));

    parallel_for(opts.repeats, opts.jobs, [&](int r) {
        const std::uint64_t seed = opts.base_seed + static_cast<std::uint64_t>(r);
        const Split split = random_split(full, opts.ratio, seed);
        report.per_repeat[static_cast<std::size_t>(r)] = run_one(split, variant, hp, opts.clamp);
        const RepeatRow& row = report.per_repeat[static_cast<std::size_t>(r)];
        std::ostringstream msg;
        msg << to_string(variant) << " ratio=" << opts.ratio << " repeat=" << r
            << " seed=" << seed << " rmse=" << row.rmse << " mae=" << row.mae;
        progress_line(opts.progress, msg.str());
    });

    aggregate(report);
    return report;
}

std::vector<EvalReport> run_ablation(const Dataset& full, HyperParams hp,
                                     const ExperimentOptions& opts,
                                     const std::vector<Variant>& variants) {
    if (opts.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    if (variants.empty()) throw std::invalid_argument("no variants given");

    std::vector<EvalReport> reports(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
        reports[v].dataset = full.tables().name;
        reports[v].variant = variants[v];
        reports[v].train_ratio = opts.ratio;
        reports[v].repeats = opts.repeats;
        reports[v].clamped = opts.clamp;
        reports[v].per_repeat.resize(static_cast<std::size_t>(opts.repeats));
    }

    // one split per repeat, shared by every variant, so differences are
    // attributable to the variant alone
    for (int r = 0; r < opts.repeats; ++r) {
        const std::uint64_t seed = opts.base_seed + static_cast<std::uint64_t>(r);
        const Split split = random_split(full, opts.ratio, seed);
        parallel_for(static_cast<int>(variants.size()), opts.jobs, [&](int v) {
            reports[static_cast<std::size_t>(v)].per_repeat[static_cast<std::size_t>(r)] =
                run_one(split, variants[static_cast<std::size_t>(v)], hp, opts.clamp);
            const RepeatRow& row =
                reports[static_cast<std::size_t>(v)].per_repeat[static_cast<std::size_t>(r)];
            std::ostringstream msg;
            msg << to_string(variants[static_cast<std::size_t>(v)]) << " repeat=" << r
                << " seed=" << seed << " rmse=" << row.rmse << " mae=" << row.mae;
            progress_line(opts.progress, msg.str());
        });
    }

    for (EvalReport& report : reports) aggregate(report);
    return reports;
}

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Lambda: return "lambda";
        case SweepAxis::K: return "k";
        case SweepAxis::Epochs: return "epochs";
    }
    return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "lambda") return SweepAxis::Lambda;
    if (s == "k") return SweepAxis::K;
    if (s == "epochs") return SweepAxis::Epochs;
    throw std::invalid_argument("unknown sweep axis: " + s);
}

std::vector<SweepPoint> sweep(const Dataset& full, Variant variant, HyperParams base,
                              SweepAxis axis, const std::vector<double>& values,
                              const ExperimentOptions& opts) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    std::vector<SweepPoint> points;
    points.reserve(values.size());
    for (double value : values) {
        HyperParams hp = base;
        switch (axis) {
            case SweepAxis::Lambda: hp.lambda = value; break;
            case SweepAxis::K: hp.k = static_cast<int>(std::llround(value)); break;
            case SweepAxis::Epochs: hp.epochs = static_cast<int>(std::llround(value)); break;
        }
        points.push_back(SweepPoint{value, run_experiment(full, variant, hp, opts)});
    }
    return points;
}

std::vector<PublishedRow> load_published(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw DataError("cannot open " + csv.string());
    std::vector<PublishedRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto f = csv_split(line);
        if (f.size() != 4) throw DataError(csv.string() + ": expected 4 columns");
        rows.push_back(PublishedRow{f[0], f[1], std::stod(f[2]), std::stod(f[3])});
    }
    return rows;
}

void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports) {
    os << "dataset,variant,ratio,repeat,seed,test_size,rmse,mae\n";
    for (const EvalReport& rep : reports) {
        const std::string prefix = rep.dataset + "," + to_string(rep.variant) + "," +
                                   format_double(rep.train_ratio) + ",";
        for (std::size_t r = 0; r < rep.per_repeat.size(); ++r) {
            const RepeatRow& row = rep.per_repeat[r];
            os << prefix << r << ',' << row.seed << ',' << row.test_size << ','
               << format_double(row.rmse, 10) << ',' << format_double(row.mae, 10) << '\n';
        }
        os << prefix << "mean,,," << format_double(rep.mean_rmse, 10) << ','
           << format_double(rep.mean_mae, 10) << '\n';
        os << prefix << "std,,," << format_double(rep.std_rmse, 10) << ",\n";
    }
}

void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepPoint>& points) {
    os << "axis,value,mean_rmse,mean_mae,std_rmse\n";
    for (const SweepPoint& p : points) {
        os << to_string(axis) << ',' << format_double(p.value) << ','
           << format_double(p.report.mean_rmse, 10) << ',' << format_double(p.report.mean_mae, 10)
           << ',' << format_double(p.report.std_rmse, 10) << '\n';
    }
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string render_report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "Method" << std::right << std::setw(10) << "RMSE"
       << std::setw(10) << "MAE" << std::setw(12) << "std(RMSE)" << std::setw(9) << "repeats"
       << std::setw(8) << "ratio" << '\n';
    for (const EvalReport& rep : reports) {
        os << std::left << std::setw(12) << display_name(rep.variant) << std::right
           << std::setw(10) << fixed4(rep.mean_rmse) << std::setw(10) << fixed4(rep.mean_mae)
           << std::setw(12) << fixed4(rep.std_rmse) << std::setw(9) << rep.repeats << std::setw(8)
           << format_double(rep.train_ratio) << '\n';
    }
    return os.str();
}

std::string render_comparison_table(const std::vector<EvalReport>& ours,
                                    const std::vector<PublishedRow>& published) {
    // columns: the distinct train ratios, descending (90% / 80% / 50% style)
    std::vector<double> ratios;
    for (const EvalReport& rep : ours) ratios.push_back(rep.train_ratio);
    for (const PublishedRow& row : published) ratios.push_back(row.ratio);
    std::sort(ratios.begin(), ratios.end(), std::greater<>());
    ratios.erase(std::unique(ratios.begin(), ratios.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                 ratios.end());

    struct Row {
        std::string method;
        bool is_published;
        std::vector<double> rmse;  // NaN when absent
    };
    std::vector<Row> rows;
    auto find_row = [&](const std::string& method, bool pub) -> Row& {
        for (Row& row : rows)
            if (row.method == method && row.is_published == pub) return row;
        rows.push_back(Row{method, pub,
                           std::vector<double>(ratios.size(), std::nan(""))});
        return rows.back();
    };
    auto ratio_col = [&](double ratio) {
        for (std::size_t c = 0; c < ratios.size(); ++c)
            if (std::abs(ratios[c] - ratio) < 1e-9) return c;
        return ratios.size();
    };
    for (const EvalReport& rep : ours)
        find_row(display_name(rep.variant), false).rmse[ratio_col(rep.train_ratio)] =
            rep.mean_rmse;
    for (const PublishedRow& row : published)
        find_row(row.method, true).rmse[ratio_col(row.ratio)] = row.rmse;

    std::ostringstream os;
    os << std::left << std::setw(14) << "Method";
    for (double ratio : ratios) {
        char head[32];
        std::snprintf(head, sizeof head, "RMSE@%g", ratio);
        os << std::right << std::setw(12) << head;
    }
    os << '\n';
    for (const Row& row : rows) {
        os << std::left << std::setw(14) << (row.method + (row.is_published ? " *" : ""));
        for (double v : row.rmse)
            os << std::right << std::setw(12) << (std::isnan(v) ? std::string("-") : fixed4(v));
        os << '\n';
    }
    bool any_published = std::any_of(rows.begin(), rows.end(),
                                     [](const Row& r) { return r.is_published; });
    if (any_published) os << "* published result, not reproduced here\n";

    // improvement of UISVD++ over every other method, per column
    const Row* uisvd = nullptr;
    for (const Row& row : rows)
        if (row.method == display_name(Variant::UISVDpp) && !row.is_published) uisvd = &row;
    if (uisvd) {
        for (std::size_t c = 0; c < ratios.size(); ++c) {
            if (std::isnan(uisvd->rmse[c])) continue;
            for (const Row& row : rows) {
                if (&row == uisvd || std::isnan(row.rmse[c])) continue;
                const double rate = improvement_rate(row.rmse[c], uisvd->rmse[c]);
                char line[128];
                std::snprintf(line, sizeof line, "UISVD++ vs %s @%g: %+.2f%%\n",
                              row.method.c_str(), ratios[c], rate * 100.0);
                os << line;
            }
        }
    }
    return os.str();
}

}  // namespace mfrec
