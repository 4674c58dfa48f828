#include "selab/config.hpp"

#include <set>

namespace selab {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a table");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

TreeParams tree_from_json(const json& p, const std::string& where) {
    TreeParams t;
    read(p, "max_depth", t.max_depth, where);
    read(p, "min_leaf", t.min_leaf, where);
    read(p, "laplace", t.laplace, where);
    if (p.contains("mtry") && !p.at("mtry").is_null()) {
        int m = 0;
        read(p, "mtry", m, where);
        t.mtry = m;
    }
    return t;
}

json tree_to_json(const TreeParams& t) {
    json j{{"max_depth", t.max_depth}, {"min_leaf", t.min_leaf}, {"laplace", t.laplace}};
    j["mtry"] = t.mtry ? json(*t.mtry) : json(nullptr);
    return j;
}

DgpConfig dgp_from_json(const json& j) {
    check_keys(j, {"k", "beta", "beta0", "gamma", "expert_noise_sd", "t_low", "t_high", "alpha"}, "dgp");
    DgpConfig c = DgpConfig::defaults();
    Eigen::Index k = 10;
    read(j, "k", k, "dgp");
    if (j.contains("beta")) {
        std::vector<double> beta;
        read(j, "beta", beta, "dgp");
        if (j.contains("k") && static_cast<Eigen::Index>(beta.size()) != k)
            throw ConfigError("dgp: beta has " + std::to_string(beta.size()) + " entries but k = " + std::to_string(k));
        c.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    } else {
        if (k < 1) throw ConfigError("dgp: k must be >= 1");
        c.beta = default_beta(k);
    }
    read(j, "beta0", c.beta0, "dgp");
    read(j, "gamma", c.gamma, "dgp");
    read(j, "expert_noise_sd", c.expert_noise_sd, "dgp");
    read(j, "t_low", c.t_low, "dgp");
    read(j, "t_high", c.t_high, "dgp");
    read(j, "alpha", c.alpha, "dgp");
    return c;
}

}  // namespace

LearnerSpec learner_from_json(const json& doc) {
    check_keys(doc, {"learner", "params"}, "learner");
    std::string name = "forest";
    read(doc, "learner", name, "learner");
    const json params = doc.value("params", json::object());
    const std::string where = "learner.params";
    if (name == "tree") {
        check_keys(params, {"max_depth", "min_leaf", "mtry", "laplace"}, where);
        return tree_from_json(params, where);
    }
    if (name == "forest") {
        check_keys(params, {"n_trees", "bootstrap", "max_depth", "min_leaf", "mtry", "laplace"}, where);
        ForestParams f;
        f.tree = tree_from_json(params, where);
        read(params, "n_trees", f.n_trees, where);
        read(params, "bootstrap", f.bootstrap, where);
        return f;
    }
    if (name == "logistic") {
        check_keys(params, {"l2", "max_iter", "tol"}, where);
        LogisticParams l;
        read(params, "l2", l.l2, where);
        read(params, "max_iter", l.max_iter, where);
        read(params, "tol", l.tol, where);
        return l;
    }
    throw ConfigError("learner must be forest, tree or logistic; got '" + name + "'");
}

json to_json(const LearnerSpec& spec) {
    json params;
    if (const auto* t = std::get_if<TreeParams>(&spec)) {
        params = tree_to_json(*t);
    } else if (const auto* f = std::get_if<ForestParams>(&spec)) {
        params = tree_to_json(f->tree);
        params["n_trees"] = f->n_trees;
        params["bootstrap"] = f->bootstrap;
    } else {
        const auto& l = std::get<LogisticParams>(spec);
        params = {{"l2", l.l2}, {"max_iter", l.max_iter}, {"tol", l.tol}};
    }
    return {{"learner", learner_name(spec)}, {"params", params}};
}

void ExperimentConfig::validate() const {
    if (n == 0) throw ConfigError("n must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    dgp.validate();
    if (semi_synthetic) semi_synthetic->validate();
    augment.validate();
    auto check = [&](const LearnerSpec& spec) {
        std::visit(
            [&](const auto& p) {
                if constexpr (std::is_same_v<std::decay_t<decltype(p)>, LogisticParams>)
                    p.validate();
                else
                    p.validate(dgp.k());
            },
            spec);
    };
    check(decision_learner);
    check(outcome_learner);
}

ExperimentConfig config_from_json(const json& doc) {
    check_keys(doc,
               {"seed", "n", "train_fraction", "folds", "dgp", "semi_synthetic", "augment", "decision_learner",
                "outcome_learner", "output_dir"},
               "config");
    ExperimentConfig c;
    if (!doc.contains("seed")) throw ConfigError("config: seed is mandatory");
    const auto& seed = doc.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
        throw ConfigError("config: seed must be a non-negative integer");
    c.seed = doc.at("seed").get<std::uint64_t>();
    read(doc, "n", c.n, "config");
    read(doc, "train_fraction", c.train_fraction, "config");
    read(doc, "folds", c.folds, "config");
    read(doc, "output_dir", c.output_dir, "config");
    if (doc.contains("dgp")) c.dgp = dgp_from_json(doc.at("dgp"));

    if (doc.contains("semi_synthetic") && !doc.at("semi_synthetic").is_null()) {
        const auto& s = doc.at("semi_synthetic");
        check_keys(s, {"enabled", "threshold"}, "semi_synthetic");
        bool enabled = true;
        read(s, "enabled", enabled, "semi_synthetic");
        if (enabled) {
            SemiSyntheticConfig sc;
            read(s, "threshold", sc.threshold, "semi_synthetic");
            c.semi_synthetic = sc;
        }
    }

    if (doc.contains("augment")) {
        const auto& a = doc.at("augment");
        check_keys(a, {"epsilon", "clip", "weight_mode"}, "augment");
        read(a, "epsilon", c.augment.epsilon, "augment");
        read(a, "clip", c.augment.clip, "augment");
        std::string mode = "none";
        read(a, "weight_mode", mode, "augment");
        if (mode == "none")
            c.augment.weight_mode = WeightMode::none;
        else if (mode == "ipw")
            c.augment.weight_mode = WeightMode::ipw;
        else
            throw ConfigError("augment.weight_mode must be none or ipw");
    }
    if (doc.contains("decision_learner")) c.decision_learner = learner_from_json(doc.at("decision_learner"));
    if (doc.contains("outcome_learner")) c.outcome_learner = learner_from_json(doc.at("outcome_learner"));
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

json to_json(const ExperimentConfig& c) {
    json j{{"seed", c.seed},
           {"n", c.n},
           {"train_fraction", c.train_fraction},
           {"folds", c.folds},
           {"dgp",
            {{"k", c.dgp.k()},
             {"beta", std::vector<double>(c.dgp.beta.data(), c.dgp.beta.data() + c.dgp.beta.size())},
             {"beta0", c.dgp.beta0},
             {"gamma", c.dgp.gamma},
             {"expert_noise_sd", c.dgp.expert_noise_sd},
             {"t_low", c.dgp.t_low},
             {"t_high", c.dgp.t_high},
             {"alpha", c.dgp.alpha}}},
           {"augment",
            {{"epsilon", c.augment.epsilon},
             {"clip", c.augment.clip},
             {"weight_mode", c.augment.weight_mode == WeightMode::ipw ? "ipw" : "none"}}},
           {"decision_learner", to_json(c.decision_learner)},
           {"outcome_learner", to_json(c.outcome_learner)}};
    j["semi_synthetic"] = c.semi_synthetic ? json{{"threshold", c.semi_synthetic->threshold}} : json(nullptr);
    return j;
}

}  // namespace selab
