// mfrec: feature-aware matrix-factorization recommender for MovieLens data.
// One subcommand per experiment type; every run writes its resolved
// configuration next to its outputs so it can be reproduced exactly.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mfrec/analysis.hpp"
#include "mfrec/csv.hpp"
#include "mfrec/dataio.hpp"
#include "mfrec/eval.hpp"
#include "mfrec/model.hpp"
#include "mfrec/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mfrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

std::string default_tag() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&now));
    return buf;
}

struct DataFlags {
    std::string data_dir;
    std::string flavor = "auto";

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", data_dir, "MovieLens dataset directory")->required();
        cmd->add_option("--flavor", flavor, "ml-100k | ml-1m | auto")
            ->check(CLI::IsMember({"auto", "ml-100k", "ml-1m"}));
    }

    Dataset load() const {
        if (flavor == "ml-100k") return load_ml100k(data_dir);
        if (flavor == "ml-1m") return load_ml1m(data_dir);
        return load_auto(data_dir);
    }
};

struct HpFlags {
    HyperParams hp;
    std::string variant = "uisvdpp";
    std::string age_encoding = "onehot";
    std::string attr_norm = "active";
    CLI::Option* k_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;

    void attach(CLI::App* cmd, bool with_variant = true) {
        if (with_variant)
            cmd->add_option("--variant", variant, "biassvd | mf | svdpp | usvdpp | isvdpp | uisvdpp")
                ->check(CLI::IsMember({"biassvd", "mf", "svdpp", "usvdpp", "isvdpp", "uisvdpp"}));
        k_opt = cmd->add_option("--k", hp.k, "latent dimension (default 25, ml-1m 20)");
        cmd->add_option("--gamma", hp.gamma, "SGD learning rate");
        cmd->add_option("--lambda", hp.lambda, "L2 regularization weight");
        cmd->add_option("--alpha", hp.alpha, "age-term weight; implicit weight is 1 - alpha")
            ->check(CLI::Range(0.0, 1.0));
        epochs_opt = cmd->add_option("--epochs", hp.epochs, "SGD epochs (default 55, ml-1m 50)");
        cmd->add_option("--seed", hp.seed, "RNG seed");
        cmd->add_option("--age-encoding,--age_encoding", age_encoding, "onehot | cumulative")
            ->check(CLI::IsMember({"onehot", "cumulative"}));
        cmd->add_option("--attr-norm,--attr_norm", attr_norm, "active | global attribute normalizer")
            ->check(CLI::IsMember({"active", "global"}));
        cmd->add_option("--init-stddev", hp.init_stddev, "Gaussian init scale");
    }

    HyperParams resolve(const Dataset& ds) {
        hp.variant = variant_from_string(variant);
        hp.age_encoding = age_encoding_from_string(age_encoding);
        hp.attr_norm = attr_norm_from_string(attr_norm);
        hp.beta = 1.0 - hp.alpha;
        const bool ml1m = ds.tables().flavor == Flavor::Ml1m;
        if (k_opt && k_opt->count() == 0) hp.k = ml1m ? 20 : 25;
        if (epochs_opt && epochs_opt->count() == 0) hp.epochs = ml1m ? 50 : 55;
        hp.validate();
        return hp;
    }
};

struct OutFlags {
    std::string out = "runs";
    std::string tag;

    void attach(CLI::App* cmd) {
        cmd->add_option("--out", out, "output root directory");
        cmd->add_option("--tag", tag, "run tag (default: timestamp)");
    }

    fs::path run_dir(const std::string& dataset, const std::string& leaf) {
        if (tag.empty()) tag = default_tag();
        fs::path dir = fs::path(out) / dataset / leaf / tag;
        fs::create_directories(dir);
        return dir;
    }
};

json hp_to_json(const HyperParams& hp) {
    json j;
    j["variant"] = to_string(hp.variant);
    j["k"] = hp.k;
    j["gamma"] = hp.gamma;
    j["lambda"] = hp.lambda;
    j["alpha"] = hp.alpha;
    j["beta"] = hp.beta;
    j["epochs"] = hp.epochs;
    j["seed"] = hp.seed;
    j["age_encoding"] = to_string(hp.age_encoding);
    j["attr_norm"] = to_string(hp.attr_norm);
    j["init_stddev"] = hp.init_stddev;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

void write_config(const fs::path& dir, const json& config) {
    std::ofstream out(dir / "config.json");
    out << config.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + (dir / "config.json").string());
}

void print_warnings(const Dataset& ds) {
    for (const std::string& w : ds.warnings()) std::cerr << "warning: " << w << '\n';
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stod(item));
    }
    return values;
}

// ---------------------------------------------------------------------- train

int cmd_train(const DataFlags& data, HpFlags& hpf, OutFlags& outf, double ratio, bool clamp) {
    Dataset full = data.load();
    print_warnings(full);
    HyperParams hp = hpf.resolve(full);

    const fs::path dir = outf.run_dir(full.tables().name, to_string(hp.variant));

    std::optional<Split> split;
    const Dataset* train_ds = &full;
    const Dataset* valid_ds = nullptr;
    if (ratio < 1.0) {
        split = random_split(full, ratio, hp.seed);
        train_ds = &split->train;
        valid_ds = &split->test;
    }

    std::ostringstream tee;
    FitOptions opts;
    opts.valid = valid_ds;
    opts.log = &tee;
    FitResult result = fit(hp, *train_ds, opts);
    write_text(dir / "epochs.csv", tee.str());
    std::cout << tee.str();

    const fs::path model_path = dir / "model.bin";
    save_model(result.model, model_path);

    json config;
    config["command"] = "train";
    config["data"] = data.data_dir;
    config["dataset"] = full.tables().name;
    config["ratio"] = ratio;
    config["clamp"] = clamp;
    config["hyperparams"] = hp_to_json(hp);
    write_config(dir, config);

    std::cout << "model: " << model_path.string() << '\n';
    if (!result.state.train_rmse_history.empty()) {
        std::cout << "final train rmse: " << result.state.train_rmse_history.back() << '\n';
        if (valid_ds)
            std::cout << "final valid rmse: " << result.state.valid_rmse_history.back() << '\n';
    }
    return kExitOk;
}

// ------------------------------------------------------------------- evaluate

int cmd_evaluate(const DataFlags& data, HpFlags& hpf, OutFlags& outf,
                 const ExperimentOptions& eopts, const std::string& published_csv) {
    Dataset full = data.load();
    print_warnings(full);
    HyperParams hp = hpf.resolve(full);

    const fs::path dir = outf.run_dir(full.tables().name, to_string(hp.variant));

    ExperimentOptions opts = eopts;
    opts.progress = &std::cerr;
    EvalReport report = run_experiment(full, hp.variant, hp, opts);

    {
        std::ofstream csv(dir / "report.csv");
        write_report_csv(csv, {report});
    }

    std::vector<PublishedRow> published;
    if (!published_csv.empty()) {
        for (const PublishedRow& row : load_published(published_csv))
            if (row.dataset == full.tables().name) published.push_back(row);
    }
    const std::string table = render_report_table({report}) + "\n" +
                              render_comparison_table({report}, published);
    write_text(dir / "table.txt", table);
    std::cout << table;

    json config;
    config["command"] = "evaluate";
    config["data"] = data.data_dir;
    config["dataset"] = full.tables().name;
    config["ratio"] = opts.ratio;
    config["repeats"] = opts.repeats;
    config["base_seed"] = opts.base_seed;
    config["clamp"] = opts.clamp;
    config["jobs"] = opts.jobs;
    if (!published_csv.empty()) config["published"] = published_csv;
    config["hyperparams"] = hp_to_json(hp);
    write_config(dir, config);
    return kExitOk;
}

// --------------------------------------------------------------------- ablate

int cmd_ablate(const DataFlags& data, HpFlags& hpf, OutFlags& outf,
               const ExperimentOptions& eopts, const std::string& variants_csv) {
    Dataset full = data.load();
    print_warnings(full);
    HyperParams hp = hpf.resolve(full);

    std::vector<Variant> variants;
    if (variants_csv.empty()) {
        variants = kAblationVariants;
    } else {
        std::stringstream ss(variants_csv);
        std::string name;
        while (std::getline(ss, name, ','))
            if (!name.empty()) variants.push_back(variant_from_string(name));
    }

    const fs::path dir = outf.run_dir(full.tables().name, "ablation");

    ExperimentOptions opts = eopts;
    opts.progress = &std::cerr;
    const std::vector<EvalReport> reports = run_ablation(full, hp, opts, variants);

    {
        std::ofstream csv(dir / "ablation.csv");
        write_report_csv(csv, reports);
    }
    const std::string table = render_report_table(reports);
    write_text(dir / "table.txt", table);
    std::cout << table;

    json config;
    config["command"] = "ablate";
    config["data"] = data.data_dir;
    config["dataset"] = full.tables().name;
    config["ratio"] = opts.ratio;
    config["repeats"] = opts.repeats;
    config["base_seed"] = opts.base_seed;
    config["clamp"] = opts.clamp;
    config["jobs"] = opts.jobs;
    json vlist = json::array();
    for (Variant v : variants) vlist.push_back(to_string(v));
    config["variants"] = vlist;
    config["hyperparams"] = hp_to_json(hp);
    write_config(dir, config);
    return kExitOk;
}

// ---------------------------------------------------------------------- sweep

int cmd_sweep(const DataFlags& data, HpFlags& hpf, OutFlags& outf,
              const ExperimentOptions& eopts, const std::string& axis_name,
              const std::string& values_csv) {
    Dataset full = data.load();
    print_warnings(full);
    HyperParams hp = hpf.resolve(full);
    const SweepAxis axis = sweep_axis_from_string(axis_name);
    const std::vector<double> values = parse_values(values_csv);
    if (values.empty()) throw std::invalid_argument("--values must name at least one value");

    const fs::path dir = outf.run_dir(full.tables().name, to_string(hp.variant));

    ExperimentOptions opts = eopts;
    opts.progress = &std::cerr;
    const std::vector<SweepPoint> points = sweep(full, hp.variant, hp, axis, values, opts);

    {
        std::ofstream csv(dir / "sweep.csv");
        write_sweep_csv(csv, axis, points);
    }
    write_sweep_csv(std::cout, axis, points);

    json config;
    config["command"] = "sweep";
    config["data"] = data.data_dir;
    config["dataset"] = full.tables().name;
    config["axis"] = axis_name;
    config["values"] = values;
    config["ratio"] = opts.ratio;
    config["repeats"] = opts.repeats;
    config["base_seed"] = opts.base_seed;
    config["clamp"] = opts.clamp;
    config["jobs"] = opts.jobs;
    config["hyperparams"] = hp_to_json(hp);
    write_config(dir, config);
    return kExitOk;
}

// -------------------------------------------------------------------- analyze

int cmd_analyze(const DataFlags& data, OutFlags& outf, int top_n, int cohort_n,
                const std::string& rank_name, int exclude_top) {
    Dataset full = data.load();
    print_warnings(full);
    const CohortRank rank = cohort_rank_from_string(rank_name);

    const fs::path dir = outf.run_dir(full.tables().name, "analysis");

    const auto popularity = popularity_table(full);
    {
        std::ofstream csv(dir / "popularity.csv");
        write_popularity_csv(csv, popularity);
    }

    std::vector<CohortTopList> cohorts;
    for (int b = 0; b < kAgeBucketCount; ++b)
        cohorts.push_back(cohort_top(full, b, cohort_n, {}, rank));
    {
        std::ofstream csv(dir / "cohort_top.csv");
        write_cohort_csv(csv, cohorts);
    }
    const OverlapResult overlap = cohort_overlap(cohorts);
    {
        std::ofstream csv(dir / "cohort_overlap.csv");
        write_overlap_csv(csv, cohorts, overlap);
    }
    {
        std::ofstream csv(dir / "cohort_common.csv");
        write_common_csv(csv, overlap);
    }

    // the same lists with the globally most popular items removed
    std::set<std::int64_t> top_ids;
    for (int i = 0; i < exclude_top && i < static_cast<int>(popularity.size()); ++i)
        top_ids.insert(popularity[static_cast<std::size_t>(i)].item_id);
    std::vector<CohortTopList> filtered;
    for (int b = 0; b < kAgeBucketCount; ++b)
        filtered.push_back(cohort_top(full, b, cohort_n, top_ids, rank));
    {
        std::ofstream csv(dir / "cohort_top_excl_popular.csv");
        write_cohort_csv(csv, filtered);
    }
    {
        const OverlapResult filtered_overlap = cohort_overlap(filtered);
        std::ofstream csv(dir / "cohort_overlap_excl_popular.csv");
        write_overlap_csv(csv, filtered, filtered_overlap);
        std::ofstream common(dir / "cohort_common_excl_popular.csv");
        write_common_csv(common, filtered_overlap);
    }

    // coarse grouping: youngest three cohorts vs the 50+ cohorts
    std::vector<CohortTopList> merged;
    merged.push_back(cohort_top_merged(full, {0, 1, 2}, cohort_n, top_ids, rank));
    merged.push_back(cohort_top_merged(full, {5, 6}, cohort_n, top_ids, rank));
    {
        const OverlapResult merged_overlap = cohort_overlap(merged);
        std::ofstream csv(dir / "cohort_groups_overlap.csv");
        write_overlap_csv(csv, merged, merged_overlap);
        std::ofstream common(dir / "cohort_groups_common.csv");
        write_common_csv(common, merged_overlap);
    }

    const Demographics demo = demographics(full);
    {
        std::ofstream csv(dir / "demographics.csv");
        write_demographics_csv(csv, demo);
    }

    std::ostringstream tables;
    tables << render_popularity_table(popularity, top_n) << '\n'
           << render_cohort_table(cohorts) << '\n';
    tables << "items shared by all cohorts:";
    for (std::int64_t id : overlap.common) tables << ' ' << id;
    tables << '\n';
    write_text(dir / "table.txt", tables.str());
    std::cout << tables.str();

    json config;
    config["command"] = "analyze";
    config["data"] = data.data_dir;
    config["dataset"] = full.tables().name;
    config["top"] = top_n;
    config["cohort_n"] = cohort_n;
    config["cohort_rank"] = rank_name;
    config["exclude_top"] = exclude_top;
    write_config(dir, config);
    return kExitOk;
}

// -------------------------------------------------------------------- predict

int cmd_predict(const std::string& model_path, std::optional<std::int64_t> user,
                std::optional<int> age, std::optional<std::int64_t> item,
                const std::string& genres_csv) {
    const Model model = load_model(model_path);

    std::vector<std::string> genres;
    {
        std::stringstream ss(genres_csv);
        std::string name;
        while (std::getline(ss, name, ','))
            if (!name.empty()) genres.push_back(name);
    }

    if (!user && !age && !item && genres.empty())
        throw std::invalid_argument("give at least one of --user/--age/--item/--genres");

    const ColdPrediction result =
        model.predict_query(user, age, item, genres.empty() ? nullptr : &genres);

    std::cout.precision(10);
    std::cout << "prediction: " << result.prediction.value << '\n'
              << "clamped:    " << result.prediction.clamped << '\n'
              << "mode:       " << to_string(result.mode) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-aware matrix-factorization recommender (UISVD++ and baselines)"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI/TOML file");

    // train
    auto* train_cmd = app.add_subcommand("train", "fit one model and save it");
    DataFlags train_data;
    HpFlags train_hp;
    OutFlags train_out;
    double train_ratio = 0.8;
    bool train_clamp = false;
    train_data.attach(train_cmd);
    train_hp.attach(train_cmd);
    train_out.attach(train_cmd);
    train_cmd->add_option("--ratio", train_ratio, "train fraction; 1.0 fits on everything")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_flag("--clamp", train_clamp, "clamp predictions to [1,5] in metrics");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "repeated random-split experiment");
    DataFlags eval_data;
    HpFlags eval_hp;
    OutFlags eval_out;
    ExperimentOptions eval_opts;
    std::string eval_published;
    eval_data.attach(eval_cmd);
    eval_hp.attach(eval_cmd);
    eval_out.attach(eval_cmd);
    eval_cmd->add_option("--ratio", eval_opts.ratio, "train fraction");
    eval_cmd->add_option("--repeats", eval_opts.repeats, "number of random splits");
    eval_cmd->add_option("--base-seed", eval_opts.base_seed, "seed of the first repeat");
    eval_cmd->add_option("--jobs", eval_opts.jobs, "parallel repeats");
    eval_cmd->add_flag("--clamp", eval_opts.clamp, "clamp predictions to [1,5]");
    eval_cmd->add_option("--published", eval_published,
                         "CSV of published baseline numbers to include in the table");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "SVD++/USVD++/ISVD++/UISVD++ on shared splits");
    DataFlags ablate_data;
    HpFlags ablate_hp;
    OutFlags ablate_out;
    ExperimentOptions ablate_opts;
    std::string ablate_variants;
    ablate_data.attach(ablate_cmd);
    ablate_hp.attach(ablate_cmd, /*with_variant=*/false);
    ablate_out.attach(ablate_cmd);
    ablate_cmd->add_option("--ratio", ablate_opts.ratio, "train fraction");
    ablate_cmd->add_option("--repeats", ablate_opts.repeats, "number of random splits");
    ablate_cmd->add_option("--base-seed", ablate_opts.base_seed, "seed of the first repeat");
    ablate_cmd->add_option("--jobs", ablate_opts.jobs, "parallel fits per split");
    ablate_cmd->add_flag("--clamp", ablate_opts.clamp, "clamp predictions to [1,5]");
    ablate_cmd->add_option("--variants", ablate_variants, "comma list (default all four)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "hyperparameter sweep");
    DataFlags sweep_data;
    HpFlags sweep_hp;
    OutFlags sweep_out;
    ExperimentOptions sweep_opts;
    std::string sweep_axis_name = "lambda";
    std::string sweep_values;
    sweep_data.attach(sweep_cmd);
    sweep_hp.attach(sweep_cmd);
    sweep_out.attach(sweep_cmd);
    sweep_cmd->add_option("--axis", sweep_axis_name, "lambda | k | epochs")
        ->check(CLI::IsMember({"lambda", "k", "epochs"}));
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--ratio", sweep_opts.ratio, "train fraction");
    sweep_cmd->add_option("--repeats", sweep_opts.repeats, "number of random splits");
    sweep_cmd->add_option("--base-seed", sweep_opts.base_seed, "seed of the first repeat");
    sweep_cmd->add_option("--jobs", sweep_opts.jobs, "parallel repeats");
    sweep_cmd->add_flag("--clamp", sweep_opts.clamp, "clamp predictions to [1,5]");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "popularity, cohorts and demographics");
    DataFlags analyze_data;
    OutFlags analyze_out;
    int analyze_top = 10;
    int analyze_cohort_n = 20;
    int analyze_exclude_top = 10;
    std::string analyze_rank = "sum";
    analyze_data.attach(analyze_cmd);
    analyze_out.attach(analyze_cmd);
    analyze_cmd->add_option("--top", analyze_top, "rows of the popularity table to print");
    analyze_cmd->add_option("--cohort-n", analyze_cohort_n, "length of each cohort list");
    analyze_cmd->add_option("--cohort-rank", analyze_rank, "sum | count | mean")
        ->check(CLI::IsMember({"sum", "count", "mean"}));
    analyze_cmd->add_option("--exclude-top", analyze_exclude_top,
                            "popular items removed in the filtered lists");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "score one (user, item) query");
    std::string predict_model;
    std::int64_t predict_user = -1, predict_item = -1;
    int predict_age = -1;
    std::string predict_genres;
    predict_cmd->add_option("--model", predict_model, "model file from `train`")->required();
    auto* user_opt = predict_cmd->add_option("--user", predict_user, "external user id");
    auto* age_opt = predict_cmd->add_option("--age", predict_age, "age for unseen users");
    auto* item_opt = predict_cmd->add_option("--item", predict_item, "external item id");
    predict_cmd->add_option("--genres", predict_genres, "comma list for unseen items");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            if (train_ratio <= 0.0) throw std::invalid_argument("--ratio must be positive");
            return cmd_train(train_data, train_hp, train_out, train_ratio, train_clamp);
        }
        if (eval_cmd->parsed())
            return cmd_evaluate(eval_data, eval_hp, eval_out, eval_opts, eval_published);
        if (ablate_cmd->parsed())
            return cmd_ablate(ablate_data, ablate_hp, ablate_out, ablate_opts, ablate_variants);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_data, sweep_hp, sweep_out, sweep_opts, sweep_axis_name,
                             sweep_values);
        if (analyze_cmd->parsed())
            return cmd_analyze(analyze_data, analyze_out, analyze_top, analyze_cohort_n,
                               analyze_rank, analyze_exclude_top);
        if (predict_cmd->parsed()) {
            std::optional<std::int64_t> user, item;
            std::optional<int> age;
            if (user_opt->count()) user = predict_user;
            if (item_opt->count()) item = predict_item;
            if (age_opt->count()) age = predict_age;
            return cmd_predict(predict_model, user, age, item, predict_genres);
        }
    } catch (const TrainDiverged& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const ModelIOError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
