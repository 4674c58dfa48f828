#include "selab/pipeline.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace selab {

namespace {

template <class F>
auto run_stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const ConfigError& e) {
        throw StageError<ConfigError>(name, e.what());
    } catch (const DataError& e) {
        throw StageError<DataError>(name, e.what());
    } catch (const InvariantError& e) {
        throw StageError<InvariantError>(name, e.what());
    }
}

ProbMap merge(ProbMap a, const ProbMap& b) {
    a.insert(b.begin(), b.end());
    return a;
}

// The decision model for a training set: out-of-fold probabilities for the
// training ids, a full-data model for everything else.
struct DecisionFit {
    ProbModel model;
    ProbMap train_probs;
    ProbMap test_probs;
};

DecisionFit fit_decision(const Dataset& train, const Dataset& test, const ExperimentConfig& config,
                         Stage cross_fit, Stage full_fit) {
    DecisionFit fit;
    fit.train_probs = cross_fit_probs(train, Target::decision, config.decision_learner, config.folds,
                                      stage_seed(config.seed, cross_fit));
    fit.model = fit_model(target_examples(train, Target::decision), config.decision_learner,
                          stage_seed(config.seed, full_fit));
    fit.test_probs = predict_all(fit.model, test);
    return fit;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
    return derive_seed(seed, static_cast<std::uint64_t>(stage));
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    run_stage("config", [&] { config.validate(); });
    ExperimentResult r;

    r.generated = run_stage("generate", [&] { return generate(config.dgp, config.n, stage_seed(config.seed, Stage::generate)); });

    auto [train, test] = run_stage("split", [&] {
        return split(r.generated.dataset, config.train_fraction, stage_seed(config.seed, Stage::split));
    });
    r.eval_truth = *r.generated.truth;

    if (config.semi_synthetic) {
        run_stage("transform", [&] {
            const auto stage_one = fit_decision(train, test, config, Stage::transform_cross_fit, Stage::transform_fit);
            r.transform_probs = merge(stage_one.train_probs, stage_one.test_probs);
            const auto transformed = semi_synthetic_transform(r.generated, *r.transform_probs, *config.semi_synthetic);
            r.eval_truth = ground_truth_table(transformed);
            std::unordered_map<std::uint64_t, const Instance*> by_id;
            for (const auto& inst : transformed.dataset.instances) by_id.emplace(inst.id, &inst);
            for (auto* part : {&train, &test})
                for (auto& inst : part->instances) inst = *by_id.at(inst.id);
        });
    }
    r.train = std::move(train);
    r.test = std::move(test);

    auto decision = run_stage("fit-decision", [&] {
        return fit_decision(r.train, r.test, config, Stage::decision_cross_fit, Stage::decision_fit);
    });
    r.decision_model = std::move(decision.model);
    r.decision_probs_train = std::move(decision.train_probs);
    r.decision_probs_test = std::move(decision.test_probs);

    run_stage("augment", [&] {
        auto plain = config.augment;
        plain.weight_mode = WeightMode::none;
        r.augmented = build_augmented(r.train, r.decision_probs_train, plain);
        r.augmented_ipw = ipw_weights(r.augmented, r.decision_probs_train, config.augment.clip);
        r.positivity = positivity_report(r.train, r.decision_probs_train, config.augment.epsilon);
        const auto& s = r.augmented.stats;
        if (s.observed + s.augmented + s.excluded != r.train.size())
            throw InvariantError("augmentation counts do not partition the training set");
    });

    run_stage("fit-outcome", [&] {
        const auto observed = observed_subset(r.train);
        r.outcome_models.emplace_back(
            kModelObserved, fit_model(observed, config.outcome_learner, stage_seed(config.seed, Stage::outcome_observed)));
        r.outcome_models.emplace_back(
            kModelAugmented,
            fit_model(r.augmented.examples, config.outcome_learner, stage_seed(config.seed, Stage::outcome_augmented)));
        r.outcome_models.emplace_back(kModelAugmentedIpw,
                                      fit_model(r.augmented_ipw.examples, config.outcome_learner,
                                                stage_seed(config.seed, Stage::outcome_augmented_ipw)));
    });

    r.report = run_stage("evaluate", [&] {
        return evaluate_models(r.outcome_models, r.test, &r.eval_truth, r.decision_probs_test, config.augment.epsilon);
    });
    return r;
}

std::string sha256_file(const std::filesystem::path& path) {
    const auto bytes = read_text_file(path);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw InvariantError("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

nlohmann::json make_manifest(const ExperimentConfig& config, const std::filesystem::path& dir,
                             const std::vector<std::filesystem::path>& outputs,
                             const std::vector<std::filesystem::path>& inputs) {
    auto entry = [](const std::filesystem::path& p, const std::string& name) {
        return nlohmann::json{{"file", name}, {"bytes", std::filesystem::file_size(p)}, {"sha256", sha256_file(p)}};
    };
    nlohmann::json outs = nlohmann::json::array(), ins = nlohmann::json::array();
    for (const auto& p : outputs) outs.push_back(entry(p, std::filesystem::relative(p, dir).generic_string()));
    for (const auto& p : inputs) ins.push_back(entry(p, p.filename().generic_string()));
    return {{"format", "selab.manifest"}, {"version", 1}, {"config", to_json(config)}, {"inputs", ins}, {"outputs", outs}};
}

void write_experiment(const ExperimentResult& r, const ExperimentConfig& config, const std::filesystem::path& dir,
                      const std::vector<std::filesystem::path>& inputs) {
    std::vector<std::filesystem::path> written;
    try {
        std::filesystem::create_directories(dir);
        auto out = [&](const std::string& name) {
            written.push_back(dir / name);
            return written.back();
        };
        save_dataset(r.generated.dataset, out("data.csv"));
        save_truth(*r.generated.truth, out("truth.csv"));
        save_dataset(r.train, out("train.csv"));
        save_dataset(r.test, out("test.csv"));
        save_truth(r.eval_truth, out("truth_eval.csv"));
        if (r.transform_probs) save_prob_map(*r.transform_probs, out("transform_probs.csv"));
        save_model(r.decision_model, out("decision_model.json"));
        save_prob_map(r.decision_probs_train, out("decision_probs_train.csv"));
        save_prob_map(r.decision_probs_test, out("decision_probs_test.csv"));
        save_augmented(r.augmented, out("augmented.csv"));
        save_augmented(r.augmented_ipw, out("augmented_ipw.csv"));
        write_text_file(out("positivity.json"), to_json(r.positivity).dump(2) + "\n");
        for (const auto& [name, model] : r.outcome_models) save_model(model, out("model_" + name + ".json"));
        for (auto& p : write_report(r.report, dir)) written.push_back(std::move(p));

        const auto manifest = make_manifest(config, dir, written, inputs);
        write_text_file(out("manifest.json"), manifest.dump(2) + "\n");
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
    }
}

nlohmann::json summarize(const EvalReport& report) {
    nlohmann::json models = nlohmann::json::object();
    for (const auto& m : report.models) {
        nlohmann::json s{{"auc_observed", m.observed.auc},
                         {"auc_augmented", m.augmented.auc},
                         {"partial_auc_observed", m.partial_auc_observed},
                         {"partial_auc_augmented", m.partial_auc_augmented}};
        if (m.full_truth) s["auc_full_truth"] = m.full_truth->auc;
        models[m.name] = std::move(s);
    }
    return {{"decision_ece", report.decision_calibration.ece}, {"models", std::move(models)}};
}

}  // namespace selab
