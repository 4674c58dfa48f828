#ifndef SELAB_CONFIG_HPP
#define SELAB_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "selab/augment.hpp"
#include "selab/learners.hpp"
#include "selab/synthgen.hpp"

namespace selab {

/// Everything one experiment run depends on. The run is a pure function of it.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t n = 20000;
    double train_fraction = 0.75;
    int folds = 5;
    DgpConfig dgp = DgpConfig::defaults();
    std::optional<SemiSyntheticConfig> semi_synthetic;
    AugmentConfig augment;
    LearnerSpec decision_learner = ForestParams{};
    LearnerSpec outcome_learner = ForestParams{};
    std::string output_dir;

    void validate() const;
};

/// Parses a config document. `seed` is mandatory; every other key has a
/// default. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The fully resolved config (defaults filled in, beta spelled out).
nlohmann::json to_json(const ExperimentConfig& config);

LearnerSpec learner_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const LearnerSpec& spec);

}  // namespace selab

#endif  // SELAB_CONFIG_HPP
