#include <string>

#include "selab/learners.hpp"

namespace selab {

namespace {

constexpr const char* kFormat = "selab.model";

nlohmann::json node_to_json(const TreeModel& tree, std::size_t i) {
    const auto& node = tree.nodes[i];
    if (node.is_leaf()) return {{"prob", node.prob}};
    return {{"feature", node.feature},
            {"threshold", node.threshold},
            {"gain", node.gain},
            {"prob", node.prob},
            {"left", node_to_json(tree, static_cast<std::size_t>(node.left))},
            {"right", node_to_json(tree, static_cast<std::size_t>(node.right))}};
}

int node_from_json(const nlohmann::json& j, TreeModel& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    TreeNode node;
    node.prob = j.at("prob").get<double>();
    if (!(node.prob >= 0.0 && node.prob <= 1.0)) throw DataError("model: leaf probability outside [0,1]");
    if (j.contains("feature")) {
        node.feature = j.at("feature").get<int>();
        if (node.feature < 0 || node.feature >= tree.k) throw DataError("model: split feature out of range");
        node.threshold = j.at("threshold").get<double>();
        node.gain = j.value("gain", 0.0);
        node.left = node_from_json(j.at("left"), tree);
        node.right = node_from_json(j.at("right"), tree);
    }
    tree.nodes[static_cast<std::size_t>(index)] = node;
    return index;
}

nlohmann::json tree_to_json(const TreeModel& tree) { return node_to_json(tree, 0); }

TreeModel tree_from_json(const nlohmann::json& j, Eigen::Index k) {
    TreeModel tree;
    tree.k = k;
    node_from_json(j, tree);
    return tree;
}

}  // namespace

nlohmann::json model_to_json(const ProbModel& model) {
    nlohmann::json doc{{"format", kFormat}, {"version", kModelFormatVersion}, {"k", model_dim(model)}};
    if (const auto* tree = std::get_if<TreeModel>(&model)) {
        doc["type"] = "tree";
        doc["root"] = tree_to_json(*tree);
    } else if (const auto* forest = std::get_if<ForestModel>(&model)) {
        doc["type"] = "forest";
        auto& trees = doc["trees"] = nlohmann::json::array();
        for (const auto& t : forest->trees) trees.push_back(tree_to_json(t));
    } else {
        const auto& lin = std::get<LogisticModel>(model);
        doc["type"] = "logistic";
        doc["intercept"] = lin.intercept;
        doc["coef"] = std::vector<double>(lin.coef.data(), lin.coef.data() + lin.coef.size());
    }
    return doc;
}

ProbModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string{}) != kFormat) throw DataError("not a selab model document");
        const int version = doc.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw DataError("unsupported model version " + std::to_string(version) + " (expected " +
                            std::to_string(kModelFormatVersion) + ")");
        const auto k = doc.at("k").get<Eigen::Index>();
        if (k < 1) throw DataError("model: k must be >= 1");
        const auto type = doc.at("type").get<std::string>();
        if (type == "tree") return tree_from_json(doc.at("root"), k);
        if (type == "forest") {
            ForestModel forest;
            forest.k = k;
            for (const auto& t : doc.at("trees")) forest.trees.push_back(tree_from_json(t, k));
            if (forest.trees.empty()) throw DataError("model: forest without trees");
            return forest;
        }
        if (type == "logistic") {
            LogisticModel lin;
            lin.intercept = doc.at("intercept").get<double>();
            const auto coef = doc.at("coef").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(coef.size()) != k) throw DataError("model: coef length != k");
            lin.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), k);
            return lin;
        }
        throw DataError("unknown model type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model document: ") + e.what());
    }
}

void save_model(const ProbModel& model, const std::filesystem::path& path) {
    write_text_file(path, model_to_json(model).dump() + "\n");
}

ProbModel load_model(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace selab
