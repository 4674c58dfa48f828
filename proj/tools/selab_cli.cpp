// selab: command-line driver for the selective-labels augmentation pipeline.
//
// Exit codes: 0 success, 2 config/usage error, 3 data error,
// 4 internal invariant violation.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selab/augment.hpp"
#include "selab/config.hpp"
#include "selab/dataset.hpp"
#include "selab/eval.hpp"
#include "selab/learners.hpp"
#include "selab/pipeline.hpp"
#include "selab/synthgen.hpp"

namespace fs = std::filesystem;
using namespace selab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
    ExperimentConfig config;
    if (!g.config_path.empty()) {
        if (g.seed) {
            auto doc = nlohmann::json::parse(read_text_file(g.config_path), nullptr, true, true);
            doc["seed"] = *g.seed;
            config = config_from_json(doc);
        } else {
            config = load_config(g.config_path);
        }
    } else {
        if (!g.seed) throw ConfigError("a seed is required: pass --seed or a --config with a seed");
        config.seed = *g.seed;
    }
    config.validate();
    return config;
}

fs::path output_dir(const GlobalOptions& g, const ExperimentConfig& config) {
    fs::path dir = !g.out.empty() ? fs::path(g.out) : fs::path(config.output_dir.empty() ? "." : config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
    return dir;
}

std::vector<fs::path> config_inputs(const GlobalOptions& g) {
    if (g.config_path.empty()) return {};
    return {fs::path(g.config_path)};
}

int cmd_generate(const GlobalOptions& g, std::optional<std::size_t> n_override) {
    const auto config = resolve_config(g);
    const std::size_t n = n_override.value_or(config.n);
    if (n == 0) throw ConfigError("--n must be positive");
    const auto dir = output_dir(g, config);
    const auto data = generate(config.dgp, n, stage_seed(config.seed, Stage::generate));
    save_dataset(data.dataset, dir / "dataset.csv");
    save_truth(*data.truth, dir / "truth.csv");

    std::size_t screened_in = 0, positives = 0;
    for (const auto& inst : data.dataset.instances) screened_in += static_cast<std::size_t>(inst.decision);
    for (const auto& [id, y] : *data.truth) positives += static_cast<std::size_t>(y);
    std::printf("generated %zu instances (k=%ld)\n", n, static_cast<long>(config.dgp.k()));
    std::printf("screened-in rate: %.4f\n", static_cast<double>(screened_in) / static_cast<double>(n));
    std::printf("outcome base rate: %.4f\n", static_cast<double>(positives) / static_cast<double>(n));
    return 0;
}

int cmd_transform(const GlobalOptions& g, const std::string& data_path, const std::string& probs_path,
                  const std::string& truth_path) {
    const auto config = resolve_config(g);
    const auto dir = output_dir(g, config);
    SyntheticData input{load_dataset(data_path), std::nullopt, {}};
    if (!truth_path.empty()) input.truth = load_truth(truth_path);
    const auto probs = load_prob_map(probs_path);
    const auto out = semi_synthetic_transform(input, probs, config.semi_synthetic.value_or(SemiSyntheticConfig{}));
    save_dataset(out.dataset, dir / "transformed.csv");
    if (out.truth) save_truth(*out.truth, dir / "truth_transformed.csv");

    std::size_t before = 0, after = 0;
    for (const auto& inst : input.dataset.instances) before += static_cast<std::size_t>(inst.decision);
    for (const auto& inst : out.dataset.instances) after += static_cast<std::size_t>(inst.decision);
    std::printf("screened in: %zu -> %zu of %zu\n", before, after, out.dataset.size());
    return 0;
}

int cmd_fit_decision(const GlobalOptions& g, const std::string& data_path, const std::string& test_path) {
    const auto config = resolve_config(g);
    const auto dir = output_dir(g, config);
    const auto train = load_dataset(data_path);
    const auto probs = cross_fit_probs(train, Target::decision, config.decision_learner, config.folds,
                                       stage_seed(config.seed, Stage::decision_cross_fit));
    const auto model = fit_model(target_examples(train, Target::decision), config.decision_learner,
                                 stage_seed(config.seed, Stage::decision_fit));
    save_model(model, dir / "decision_model.json");
    save_prob_map(probs, dir / "decision_probs.csv");
    if (!test_path.empty()) save_prob_map(predict_all(model, load_dataset(test_path)), dir / "decision_probs_test.csv");

    std::vector<double> p;
    std::vector<int> d;
    for (const auto& inst : train.instances) {
        p.push_back(probs.at(inst.id));
        d.push_back(inst.decision);
    }
    std::printf("cross-fitted decision ECE: %.4f\n", calibration(p, d).ece);
    return 0;
}

int cmd_augment(const GlobalOptions& g, const std::string& data_path, const std::string& probs_path,
                const std::string& weights) {
    auto config = resolve_config(g);
    if (weights == "ipw")
        config.augment.weight_mode = WeightMode::ipw;
    else if (weights == "none")
        config.augment.weight_mode = WeightMode::none;
    else if (!weights.empty())
        throw ConfigError("--weights must be none or ipw");
    const auto dir = output_dir(g, config);
    const auto train = load_dataset(data_path);
    const auto probs = load_prob_map(probs_path);
    const auto set = build_augmented(train, probs, config.augment);
    save_augmented(set, dir / "augmented.csv");
    write_text_file(dir / "positivity.json",
                    to_json(positivity_report(train, probs, config.augment.epsilon)).dump(2) + "\n");
    std::printf("observed %zu, augmented %zu, skipped-already-observed %zu, excluded %zu\n", set.stats.observed,
                set.stats.augmented, set.stats.skipped_already_observed, set.stats.excluded);
    return 0;
}

int cmd_fit_outcome(const GlobalOptions& g, const std::string& data_path, const std::string& augmented_path,
                    const std::string& name) {
    const auto config = resolve_config(g);
    const auto dir = output_dir(g, config);
    const auto train = load_dataset(data_path);
    std::vector<LabeledExample> examples;
    Stage stage = Stage::outcome_observed;
    if (augmented_path.empty()) {
        examples = observed_subset(train);
    } else {
        const auto set = load_augmented(augmented_path, train);
        examples = set.examples;
        const bool weighted = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.weight != 1.0; });
        stage = weighted ? Stage::outcome_augmented_ipw : Stage::outcome_augmented;
    }
    const auto model = fit_model(examples, config.outcome_learner, stage_seed(config.seed, stage));
    const auto path = dir / ("model_" + name + ".json");
    save_model(model, path);
    std::printf("fit %s on %zu examples -> %s\n", learner_name(config.outcome_learner).c_str(), examples.size(),
                path.string().c_str());
    return 0;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& data_path, const std::string& truth_path,
                 const std::string& decision_path, const std::vector<std::string>& model_args) {
    const auto config = resolve_config(g);
    const auto dir = output_dir(g, config);
    const auto test = load_dataset(data_path);
    const auto decision = load_model(decision_path);
    if (model_dim(decision) != test.dim())
        throw DataError("decision model expects " + std::to_string(model_dim(decision)) + " features but dataset has " +
                        std::to_string(test.dim()));

    std::vector<NamedModel> models;
    for (const auto& arg : model_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--model expects name=path, got '" + arg + "'");
        const auto name = arg.substr(0, eq);
        auto model = load_model(arg.substr(eq + 1));
        if (model_dim(model) != test.dim())
            throw DataError("model '" + name + "' expects " + std::to_string(model_dim(model)) +
                            " features but dataset has " + std::to_string(test.dim()));
        models.emplace_back(name, std::move(model));
    }
    std::optional<TruthTable> truth;
    if (!truth_path.empty()) truth = load_truth(truth_path);

    const auto report =
        evaluate_models(models, test, truth ? &*truth : nullptr, predict_all(decision, test), config.augment.epsilon);
    write_report(report, dir);
    for (const auto& m : report.models)
        std::printf("%-16s AUC observed %.4f  augmented %.4f\n", m.name.c_str(), m.observed.auc, m.augmented.auc);
    return 0;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) throw ConfigError("--seeds expects a..b");
    try {
        std::size_t used_a = 0, used_b = 0;
        const auto a_text = text.substr(0, dots), b_text = text.substr(dots + 2);
        const auto a = std::stoull(a_text, &used_a);
        const auto b = std::stoull(b_text, &used_b);
        if (used_a != a_text.size() || used_b != b_text.size() || b < a) throw std::invalid_argument("range");
        return {a, b};
    } catch (const std::exception&) {
        throw ConfigError("--seeds expects a..b with a <= b, got '" + text + "'");
    }
}

void print_summary(const EvalReport& report) {
    std::printf("%-16s %10s %10s %10s %12s\n", "model", "auc_obs", "auc_aug", "auc_full", "pauc_aug@0.2");
    for (const auto& m : report.models)
        std::printf("%-16s %10.4f %10.4f %10.4f %12.4f\n", m.name.c_str(), m.observed.auc, m.augmented.auc,
                    m.full_truth ? m.full_truth->auc : -1.0, m.partial_auc_augmented);
    std::printf("decision-model ECE (test): %.4f\n", report.decision_calibration.ece);
}

int cmd_experiment(const GlobalOptions& g, const std::string& seeds) {
    auto config = resolve_config(g);
    const auto dir = output_dir(g, config);
    const auto inputs = config_inputs(g);
    if (seeds.empty()) {
        const auto result = run_experiment(config);
        write_experiment(result, config, dir, inputs);
        print_summary(result.report);
        return 0;
    }

    const auto [first, last] = parse_seed_range(seeds);
    nlohmann::json summary{{"seeds", nlohmann::json::array()}};
    for (auto s = first;; ++s) {
        config.seed = s;
        const auto result = run_experiment(config);
        write_experiment(result, config, dir / ("seed_" + std::to_string(s)), inputs);
        auto entry = summarize(result.report);
        entry["seed"] = s;
        summary["seeds"].push_back(std::move(entry));
        std::printf("seed %llu\n", static_cast<unsigned long long>(s));
        print_summary(result.report);
        if (s == last) break;
    }
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning under selective labels with expert-consistency augmentation"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config_path, "Experiment config (JSON)");
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed; overrides the config");
    app.add_option("--out", g.out, "Output directory");

    std::optional<std::size_t> n;
    std::string data, probs, truth, test, augmented, name = "outcome", weights, decision, seeds;
    std::vector<std::string> models;

    auto* gen = app.add_subcommand("generate", "Draw a synthetic dataset (dataset.csv, truth.csv)");
    gen->add_option("--n", n, "Number of instances (default: config n)");

    auto* tr = app.add_subcommand("transform", "Semi-synthetic relabeling (transformed.csv)");
    tr->add_option("--data", data, "Dataset CSV")->required();
    tr->add_option("--probs", probs, "Decision probabilities CSV (id,prob)")->required();
    tr->add_option("--truth", truth, "Truth CSV (id,y_true)");

    auto* fd = app.add_subcommand("fit-decision", "Fit the decision model and cross-fitted propensities");
    fd->add_option("--data", data, "Training dataset CSV")->required();
    fd->add_option("--test", test, "Optional test dataset CSV to score");

    auto* au = app.add_subcommand("augment", "Build the augmented training set (augmented.csv)");
    au->add_option("--data", data, "Training dataset CSV")->required();
    au->add_option("--probs", probs, "Decision probabilities CSV")->required();
    au->add_option("--weights", weights, "none or ipw (default: config)");

    auto* fo = app.add_subcommand("fit-outcome", "Fit an outcome model (model_<name>.json)");
    fo->add_option("--data", data, "Training dataset CSV")->required();
    fo->add_option("--augmented", augmented, "Augmented set CSV; observed-only when omitted");
    fo->add_option("--name", name, "Model name");

    auto* ev = app.add_subcommand("evaluate", "Evaluate persisted models on a test set");
    ev->add_option("--data", data, "Test dataset CSV")->required();
    ev->add_option("--truth", truth, "Truth CSV for full-truth evaluation");
    ev->add_option("--decision-model", decision, "Decision model JSON")->required();
    ev->add_option("--model", models, "name=path of an outcome model (repeatable)")->required();

    auto* ex = app.add_subcommand("experiment", "Run the full pipeline");
    ex->add_option("--seeds", seeds, "Run seeds a..b into seed_<s>/ subdirectories");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (seed_opt->count()) g.seed = seed_value;

    try {
        if (*gen) return cmd_generate(g, n);
        if (*tr) return cmd_transform(g, data, probs, truth);
        if (*fd) return cmd_fit_decision(g, data, test);
        if (*au) return cmd_augment(g, data, probs, weights);
        if (*fo) return cmd_fit_outcome(g, data, augmented, name);
        if (*ev) return cmd_evaluate(g, data, truth, decision, models);
        if (*ex) return cmd_experiment(g, seeds);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
