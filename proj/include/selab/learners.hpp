#ifndef SELAB_LEARNERS_HPP
#define SELAB_LEARNERS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "selab/dataset.hpp"

namespace selab {

struct TreeParams {
    int max_depth = 8;
    int min_leaf = 5;
    /// Features sampled per split; ceil(sqrt(k)) when unset.
    std::optional<int> mtry;
    /// Leaf probability is (w+ + laplace) / (w+ + w- + 2 laplace).
    double laplace = 1.0;

    int resolved_mtry(Eigen::Index k) const;
    void validate(Eigen::Index k) const;
};

struct ForestParams {
    int n_trees = 200;
    TreeParams tree;
    bool bootstrap = true;

    void validate(Eigen::Index k) const;
};

struct LogisticParams {
    double l2 = 1e-3;
    int max_iter = 5000;
    double tol = 1e-6;

    void validate() const;
};

using LearnerSpec = std::variant<TreeParams, ForestParams, LogisticParams>;

std::string learner_name(const LearnerSpec& spec);

/// Flat tree node. `feature < 0` marks a leaf; internal nodes send
/// x[feature] <= threshold to `left`.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    /// Weighted Gini decrease achieved by this split (0 for leaves).
    double gain = 0.0;
    int left = -1;
    int right = -1;
    double prob = 0.5;

    bool is_leaf() const noexcept { return feature < 0; }
};

struct TreeModel {
    Eigen::Index k = 0;
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int depth() const;
};

struct ForestModel {
    Eigen::Index k = 0;
    std::vector<TreeModel> trees;
};

struct LogisticModel {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    /// Optimizer diagnostics.
    int iterations = 0;
    double grad_max_norm = 0.0;
};

/// A fitted probabilistic binary classifier x -> P(label = 1 | x).
using ProbModel = std::variant<TreeModel, ForestModel, LogisticModel>;

Eigen::Index model_dim(const ProbModel& model);

/// Dense view of a list of examples.
struct TrainingSet {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;  // 0/1
    Eigen::VectorXd w;
};

TrainingSet make_training_set(std::span<const LabeledExample> examples);

TreeModel fit_tree(std::span<const LabeledExample> examples, const TreeParams& params, std::uint64_t seed);

/// Tree t is grown from seed + t, so a single-tree forest without bootstrap
/// reproduces fit_tree exactly. With bootstrap on, each example's weight is
/// multiplied by its draw count.
ForestModel fit_forest(std::span<const LabeledExample> examples, const ForestParams& params,
                       std::uint64_t seed);

/// Weighted, L2-penalised logistic regression by gradient descent with an
/// Armijo backtracking line search. The objective is the weight-normalised
/// negative log-likelihood plus (l2/2)*||coef||^2; the intercept is not
/// penalised. Starts from zero, so `seed` does not affect the result.
LogisticModel fit_logistic(std::span<const LabeledExample> examples, const LogisticParams& params,
                           std::uint64_t seed);

ProbModel fit_model(std::span<const LabeledExample> examples, const LearnerSpec& spec, std::uint64_t seed);

/// Objective value and gradient at theta = [intercept, coef...].
struct LossAndGradient {
    double loss = 0.0;
    Eigen::VectorXd grad;
};
LossAndGradient logistic_objective(const TrainingSet& data, double l2,
                                   const Eigen::Ref<const Eigen::VectorXd>& theta);

double predict_proba(const ProbModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_proba(const TreeModel& tree, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Predictions for every instance of `ds`, keyed by id.
ProbMap predict_all(const ProbModel& model, const Dataset& ds);

enum class Target { decision, outcome };

/// Examples for learning `target`: every instance labeled by d, or only the
/// d = 1 instances labeled by y.
std::vector<LabeledExample> target_examples(const Dataset& ds, Target target);

/// Out-of-fold probabilities: instances are shuffled with `seed`, dealt into
/// `folds` folds, and each fold is scored by a model fit on the others.
ProbMap cross_fit_probs(const Dataset& ds, Target target, const LearnerSpec& spec, int folds,
                        std::uint64_t seed);

/// Probabilities from a single model fit on every usable instance.
ProbMap in_sample_probs(const Dataset& ds, Target target, const LearnerSpec& spec, std::uint64_t seed);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const ProbModel& model);
/// Throws DataError on unknown formats or version mismatches.
ProbModel model_from_json(const nlohmann::json& doc);

void save_model(const ProbModel& model, const std::filesystem::path& path);
ProbModel load_model(const std::filesystem::path& path);

}  // namespace selab

#endif  // SELAB_LEARNERS_HPP
