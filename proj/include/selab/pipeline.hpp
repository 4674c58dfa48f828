#ifndef SELAB_PIPELINE_HPP
#define SELAB_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selab/augment.hpp"
#include "selab/config.hpp"
#include "selab/eval.hpp"
#include "selab/learners.hpp"
#include "selab/synthgen.hpp"

namespace selab {

/// Seed streams of the experiment stages.
enum class Stage : std::uint64_t {
    generate = 1,
    split = 2,
    transform_cross_fit = 3,
    transform_fit = 4,
    decision_cross_fit = 5,
    decision_fit = 6,
    outcome_observed = 7,
    outcome_augmented = 8,
    outcome_augmented_ipw = 9,
};

std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

inline constexpr const char* kModelObserved = "observed";
inline constexpr const char* kModelAugmented = "augmented";
inline constexpr const char* kModelAugmentedIpw = "augmented_ipw";

/// Everything one run produces, in memory.
struct ExperimentResult {
    SyntheticData generated;
    Dataset train;  // after the semi-synthetic transform when enabled
    Dataset test;
    TruthTable eval_truth;
    std::optional<ProbMap> transform_probs;  // stage-one decision probs, train and test
    ProbModel decision_model;
    ProbMap decision_probs_train;  // cross-fitted
    ProbMap decision_probs_test;   // from decision_model
    PositivityReport positivity;
    AugmentedSet augmented;
    AugmentedSet augmented_ipw;
    std::vector<NamedModel> outcome_models;
    EvalReport report;
};

/// Error raised by a pipeline stage; keeps the category of the cause.
template <class Base>
class StageError : public Base {
public:
    StageError(const std::string& stage, const std::string& cause)
        : Base("stage '" + stage + "' failed: " + cause) {}
};

/// generate -> split -> [decision model -> semi-synthetic transform] ->
/// decision model -> augment -> three outcome models -> evaluate.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes every artifact of `result` plus manifest.json into `dir`.
/// `inputs` are files the run read (the config file), hash-listed in the
/// manifest. On failure every file written so far is removed.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir,
                      const std::vector<std::filesystem::path>& inputs = {});

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Manifest document: resolved config plus name/size/hash of every artifact.
nlohmann::json make_manifest(const ExperimentConfig& config, const std::filesystem::path& dir,
                             const std::vector<std::filesystem::path>& outputs,
                             const std::vector<std::filesystem::path>& inputs);

/// Per-seed AUC summary used by multi-seed runs.
nlohmann::json summarize(const EvalReport& report);

}  // namespace selab

#endif  // SELAB_PIPELINE_HPP
