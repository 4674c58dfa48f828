#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "selab/dataset.hpp"
#include "selab/learners.hpp"
#include "selab/synthgen.hpp"

using namespace selab;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("selab_cli_test_" + std::to_string(getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Run run_cli(const std::string& args) {
    static int counter = 0;
    const auto base = scratch() / ("run" + std::to_string(counter++));
    const std::string cmd = std::string(SELAB_CLI_PATH) + " " + args + " >" + base.string() + ".out 2>" +
                            base.string() + ".err";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(base.string() + ".out");
    r.err = read_text_file(base.string() + ".err");
    return r;
}

std::string small_config() {
    const auto path = scratch() / "small.json";
    if (!fs::exists(path))
        write_text_file(path, R"({
  // quick run
  "seed": 9,
  "n": 1500,
  "decision_learner": {"learner": "forest", "params": {"n_trees": 15}},
  "outcome_learner": {"learner": "forest", "params": {"n_trees": 15}}
})");
    return path.string();
}

}  // namespace

TEST(Cli, ZeroInstancesIsUsageError) {
    const auto r = run_cli("generate --seed 1 --n 0 --out " + (scratch() / "zero").string());
    EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli("").code, 2);
    EXPECT_EQ(run_cli("frobnicate").code, 2);
    EXPECT_EQ(run_cli("generate --n 10").code, 2);  // no seed anywhere
    const auto bad_csv = scratch() / "bad.csv";
    write_text_file(bad_csv, "id,f0,d,y\n0,1,0,1\n");
    const auto r = run_cli("fit-decision --seed 1 --data " + bad_csv.string() + " --out " + (scratch() / "bad").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("row 1: outcome present but d=0"), std::string::npos) << r.err;
    const auto bad_cfg = scratch() / "bad_cfg.json";
    write_text_file(bad_cfg, R"({"seed": 1, "augment": {"epsilon": 2}})");
    EXPECT_EQ(run_cli("generate --config " + bad_cfg.string()).code, 2);
}

TEST(Cli, GenerateIsReproducible) {
    const auto a = scratch() / "gen_a";
    const auto b = scratch() / "gen_b";
    ASSERT_EQ(run_cli("generate --seed 4 --n 300 --out " + a.string()).code, 0);
    ASSERT_EQ(run_cli("generate --seed 4 --n 300 --out " + b.string()).code, 0);
    for (const char* f : {"dataset.csv", "truth.csv"}) EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
    EXPECT_EQ(load_dataset(a / "dataset.csv").size(), 300u);
}

TEST(Cli, GenerateScreenInRateMatchesMonteCarlo) {
    const auto dir = scratch() / "gen_rate";
    const auto r = run_cli("generate --seed 1 --n 20000 --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ds = load_dataset(dir / "dataset.csv");
    double screened_in = 0;
    for (const auto& inst : ds.instances) screened_in += inst.decision;
    const double rate = screened_in / ds.size();

    // Direct simulation of the expert's decision, independent of generate().
    const auto c = DgpConfig::defaults();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    const int draws = 1'000'000;
    int hits = 0;
    Eigen::VectorXd x(c.k());
    for (int i = 0; i < draws; ++i) {
        for (auto& v : x) v = normal(rng);
        const double s = 1.0 / (1.0 + std::exp(-(c.alpha * (c.beta.dot(x) + c.beta0) + c.expert_noise_sd * normal(rng))));
        const double coin = unif(rng);
        hits += s > c.t_high || (s >= c.t_low && coin < s);
    }
    const double p = static_cast<double>(hits) / draws;
    const double se = std::sqrt(p * (1 - p) / ds.size() + p * (1 - p) / draws);
    EXPECT_LT(std::abs(rate - p), 3 * se) << "generated " << rate << " vs " << p;
    EXPECT_NE(r.out.find("screened-in rate"), std::string::npos);
}

TEST(Cli, StageByStageChain) {
    const auto dir = scratch() / "chain";
    const auto cfg = small_config();
    ASSERT_EQ(run_cli("generate --config " + cfg + " --out " + dir.string()).code, 0);
    const auto data = (dir / "dataset.csv").string();
    auto r = run_cli("fit-decision --config " + cfg + " --data " + data + " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli("augment --config " + cfg + " --weights ipw --data " + data + " --probs " + (dir / "decision_probs.csv").string() +
              " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "positivity.json"));
    r = run_cli("fit-outcome --config " + cfg + " --name aug --data " + data + " --augmented " +
              (dir / "augmented.csv").string() + " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli("evaluate --config " + cfg + " --data " + data + " --truth " + (dir / "truth.csv").string() +
              " --decision-model " + (dir / "decision_model.json").string() + " --model aug=" +
              (dir / "model_aug.json").string() + " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "roc_aug_full.csv"));

    r = run_cli("transform --config " + cfg + " --data " + data + " --probs " + (dir / "decision_probs.csv").string() +
              " --truth " + (dir / "truth.csv").string() + " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto transformed = load_dataset(dir / "transformed.csv");
    const auto before = load_dataset(data);
    for (std::size_t i = 0; i < before.size(); ++i)
        EXPECT_LE(transformed.instances[i].decision, before.instances[i].decision);
}

TEST(Cli, ExperimentThenEvaluateReproducesReport) {
    const auto dir = scratch() / "experiment";
    const auto cfg = small_config();
    auto r = run_cli("experiment --config " + cfg + " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;

    const auto again = scratch() / "reevaluate";
    std::string models;
    for (const char* m : {"observed", "augmented", "augmented_ipw"})
        models += std::string(" --model ") + m + "=" + (dir / ("model_" + std::string(m) + ".json")).string();
    r = run_cli("evaluate --config " + cfg + " --data " + (dir / "test.csv").string() + " --truth " +
              (dir / "truth_eval.csv").string() + " --decision-model " + (dir / "decision_model.json").string() + models +
              " --out " + again.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_text_file(again / "report.json"), read_text_file(dir / "report.json"));
    EXPECT_EQ(read_text_file(again / "roc_observed_augmented.csv"), read_text_file(dir / "roc_observed_augmented.csv"));
}

TEST(Cli, ExperimentRerunHasIdenticalManifest) {
    const auto cfg = small_config();
    const auto a = scratch() / "exp_a";
    const auto b = scratch() / "exp_b";
    ASSERT_EQ(run_cli("experiment --config " + cfg + " --out " + a.string()).code, 0);
    ASSERT_EQ(run_cli("experiment --config " + cfg + " --out " + b.string()).code, 0);
    EXPECT_EQ(read_text_file(a / "manifest.json"), read_text_file(b / "manifest.json"));
    EXPECT_NE(read_text_file(a / "manifest.json").find("small.json"), std::string::npos);
}

TEST(Cli, SeedRange) {
    const auto dir = scratch() / "seeds";
    const auto r = run_cli("experiment --config " + small_config() + " --seeds 2..3 --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "seed_2" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "seed_3" / "report.json"));
    const auto summary = nlohmann::json::parse(read_text_file(dir / "summary.json"));
    EXPECT_EQ(summary.at("seeds").size(), 2u);
    EXPECT_EQ(run_cli("experiment --config " + small_config() + " --seeds 3..2 --out " + dir.string()).code, 2);
}

TEST(Cli, WrongDimensionModelNamesBothSizes) {
    const auto dir = scratch() / "wrong_k";
    ASSERT_EQ(run_cli("generate --seed 1 --n 200 --out " + dir.string()).code, 0);
    save_model(ProbModel{LogisticModel{Eigen::VectorXd::Zero(3), 0.0}}, dir / "narrow.json");
    save_model(ProbModel{LogisticModel{Eigen::VectorXd::Zero(10), 0.0}}, dir / "decision.json");
    const auto r = run_cli("evaluate --seed 1 --data " + (dir / "dataset.csv").string() + " --decision-model " +
                         (dir / "decision.json").string() + " --model narrow=" + (dir / "narrow.json").string() +
                         " --out " + dir.string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("expects 3 features but dataset has 10"), std::string::npos) << r.err;
}

TEST(Cli, ModelVersionMismatch) {
    const auto dir = scratch() / "version";
    ASSERT_EQ(run_cli("generate --seed 1 --n 200 --out " + dir.string()).code, 0);
    auto doc = model_to_json(ProbModel{LogisticModel{Eigen::VectorXd::Zero(10), 0.0}});
    doc["version"] = 99;
    write_text_file(dir / "future.json", doc.dump());
    const auto r = run_cli("evaluate --seed 1 --data " + (dir / "dataset.csv").string() + " --decision-model " +
                         (dir / "future.json").string() + " --model m=" + (dir / "future.json").string() + " --out " +
                         dir.string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("version"), std::string::npos) << r.err;
}
