#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfrec/model.hpp"
#include "testutil.hpp"

namespace tu = testutil;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code;
    std::string output;
};

const char* cli_path() { return std::getenv("MFREC_BIN"); }

CliResult run_cli(const std::string& args) {
    tu::TempDir out;
    const fs::path capture = out.path / "out.txt";
    const std::string cmd =
        std::string("\"") + cli_path() + "\" " + args + " > \"" + capture.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(capture);
    std::string output((std::istreambuf_iterator<char>(in)), {});
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, std::move(output)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("command-line pipeline") {
    if (!cli_path()) {
        MESSAGE("MFREC_BIN not set; skipping CLI tests");
        return;
    }

    tu::TempDir data;
    tu::write_mini_ml100k(data.path);
    const std::string data_arg = "--data \"" + data.path.string() + "\"";

    SUBCASE("train writes model, epoch log and config") {
        tu::TempDir out;
        const CliResult r = run_cli("train " + data_arg +
                                    " --variant uisvdpp --k 3 --epochs 4 --seed 7 --tag t0 "
                                    "--out \"" + out.path.string() + "\"");
        CAPTURE(r.output);
        CHECK(r.exit_code == 0);
        const fs::path run = out.path / "ml-100k" / "uisvdpp" / "t0";
        CHECK(fs::exists(run / "model.bin"));
        CHECK(fs::exists(run / "config.json"));
        const std::string log = slurp(run / "epochs.csv");
        CHECK(log.find("epoch,train_loss,train_rmse,valid_rmse,seconds") == 0);
        CHECK(std::count(log.begin(), log.end(), '\n') == 5);  // header + 4 epochs

        // the saved model loads and predicts
        const mfrec::Model m = mfrec::load_model(run / "model.bin");
        CHECK(m.hp.k == 3);
        CHECK(m.num_users() == 6);
    }

    SUBCASE("identical seeds give byte-identical models") {
        tu::TempDir out_a, out_b;
        const std::string common =
            "train " + data_arg + " --variant svdpp --k 3 --epochs 3 --seed 9 --tag t ";
        CHECK(run_cli(common + "--out \"" + out_a.path.string() + "\"").exit_code == 0);
        CHECK(run_cli(common + "--out \"" + out_b.path.string() + "\"").exit_code == 0);
        const std::string a = slurp(out_a.path / "ml-100k" / "svdpp" / "t" / "model.bin");
        const std::string b = slurp(out_b.path / "ml-100k" / "svdpp" / "t" / "model.bin");
        CHECK(!a.empty());
        CHECK(a == b);
    }

    SUBCASE("missing dataset directory exits with the data error code") {
        const CliResult r = run_cli("train --data /no/such/dir --tag x");
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("error") != std::string::npos);
    }

    SUBCASE("divergent training exits with its own code") {
        tu::TempDir out;
        const CliResult r = run_cli("train " + data_arg +
                                    " --variant svdpp --k 3 --epochs 30 --gamma 1e6 --tag d "
                                    "--out \"" + out.path.string() + "\"");
        CAPTURE(r.output);
        CHECK(r.exit_code == 3);
        CHECK(r.output.find("diverged") != std::string::npos);
    }

    SUBCASE("predict matches the in-process prediction") {
        tu::TempDir out;
        CHECK(run_cli("train " + data_arg + " --variant uisvdpp --k 3 --epochs 4 --seed 7 "
                      "--tag p --out \"" + out.path.string() + "\"").exit_code == 0);
        const fs::path model_path = out.path / "ml-100k" / "uisvdpp" / "p" / "model.bin";

        const CliResult r = run_cli("predict --model \"" + model_path.string() +
                                    "\" --user 1 --item 3");
        CAPTURE(r.output);
        CHECK(r.exit_code == 0);
        std::istringstream in(r.output);
        std::string label;
        double value = 0.0;
        in >> label >> value;
        CHECK(label == "prediction:");

        const mfrec::Model m = mfrec::load_model(model_path);
        CHECK(value == doctest::Approx(m.predict(1, 3).value).epsilon(1e-6));
        CHECK(r.output.find("mode:       full") != std::string::npos);

        // age-only cold start for an unseen user
        const CliResult cold = run_cli("predict --model \"" + model_path.string() +
                                       "\" --user 999 --age 30 --item 3");
        CHECK(cold.exit_code == 0);
        CHECK(cold.output.find("cold-user") != std::string::npos);
        std::istringstream cin(cold.output);
        cin >> label >> value;
        const auto expect = m.predict_query(999, 30, 3, nullptr);
        CHECK(value == doctest::Approx(expect.prediction.value).epsilon(1e-6));

        // no usable information at all
        const CliResult none = run_cli("predict --model \"" + model_path.string() +
                                       "\" --user 999 --item 777");
        CHECK(none.exit_code == 0);
        CHECK(none.output.find("global-mean-fallback") != std::string::npos);

        // nothing given is a usage error
        const CliResult usage = run_cli("predict --model \"" + model_path.string() + "\"");
        CHECK(usage.exit_code == 1);
    }

    SUBCASE("sweep emits one CSV row per value") {
        tu::TempDir out;
        const CliResult r = run_cli("sweep " + data_arg +
                                    " --variant svdpp --k 2 --epochs 2 --repeats 1 "
                                    "--axis lambda --values 0.05,0.1 --tag s --out \"" +
                                    out.path.string() + "\"");
        CAPTURE(r.output);
        CHECK(r.exit_code == 0);
        const std::string csv = slurp(out.path / "ml-100k" / "svdpp" / "s" / "sweep.csv");
        CHECK(csv.find("axis,value,mean_rmse,mean_mae,std_rmse") == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }

    SUBCASE("analyze writes the full CSV bundle") {
        tu::TempDir out;
        const CliResult r = run_cli("analyze " + data_arg + " --top 3 --tag a --out \"" +
                                    out.path.string() + "\"");
        CAPTURE(r.output);
        CHECK(r.exit_code == 0);
        const fs::path run = out.path / "ml-100k" / "analysis" / "a";
        for (const char* name :
             {"popularity.csv", "cohort_top.csv", "cohort_overlap.csv", "cohort_common.csv",
              "cohort_top_excl_popular.csv", "cohort_overlap_excl_popular.csv",
              "cohort_common_excl_popular.csv", "cohort_groups_overlap.csv",
              "cohort_groups_common.csv", "demographics.csv", "config.json", "table.txt"}) {
            CAPTURE(name);
            CHECK(fs::exists(run / name));
        }
        const std::string pop = slurp(run / "popularity.csv");
        CHECK(pop.rfind("rank,", 0) == 0);
    }

    SUBCASE("evaluate writes report and tables") {
        tu::TempDir out;
        const CliResult r = run_cli("evaluate " + data_arg +
                                    " --variant biassvd --k 2 --epochs 2 --repeats 2 "
                                    "--ratio 0.7 --tag e --out \"" + out.path.string() + "\"");
        CAPTURE(r.output);
        CHECK(r.exit_code == 0);
        const fs::path run = out.path / "ml-100k" / "biassvd" / "e";
        CHECK(fs::exists(run / "report.csv"));
        CHECK(fs::exists(run / "table.txt"));
        CHECK(r.output.find("Bias_SVD") != std::string::npos);
    }

    SUBCASE("ablate runs a variant subset on shared splits") {
        tu::TempDir out;
        const CliResult r = run_cli("ablate " + data_arg +
                                    " --k 2 --epochs 2 --repeats 1 --variants svdpp,uisvdpp "
                                    "--tag ab --out \"" + out.path.string() + "\"");
        CAPTURE(r.output);
        CHECK(r.exit_code == 0);
        const std::string csv = slurp(out.path / "ml-100k" / "ablation" / "ab" / "ablation.csv");
        CHECK(csv.find("svdpp") != std::string::npos);
        CHECK(csv.find("uisvdpp") != std::string::npos);
        CHECK(csv.find("usvdpp") == std::string::npos);
    }

    SUBCASE("unknown flags are usage errors") {
        const CliResult r = run_cli("train " + data_arg + " --no-such-flag");
        CHECK(r.exit_code == 1);
        CHECK(run_cli("").exit_code == 1);  // a subcommand is required
        CHECK(run_cli("--help").exit_code == 0);
    }
}
