#ifndef SELAB_AUGMENT_HPP
#define SELAB_AUGMENT_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "selab/dataset.hpp"

namespace selab {

enum class WeightMode { none, ipw };

struct AugmentConfig {
    double epsilon = 0.05;
    WeightMode weight_mode = WeightMode::none;
    double clip = 20.0;

    void validate() const;
};

struct AugmentStats {
    std::size_t observed = 0;
    std::size_t augmented = 0;
    /// d = 1 instances whose propensity fell below epsilon; kept as observed.
    std::size_t skipped_already_observed = 0;
    /// d = 0 instances with propensity >= epsilon; no label available.
    std::size_t excluded = 0;

    friend bool operator==(const AugmentStats&, const AugmentStats&) = default;
};

/// Observed examples plus confidently screened-out examples labeled by the
/// expert decision.
struct AugmentedSet {
    std::vector<LabeledExample> examples;
    AugmentStats stats;
};

/// Builds the augmented training set:
///   every d = 1 instance, labeled by its outcome, plus
///   every d = 0 instance with decision probability < epsilon, labeled 0.
/// d = 1 instances below epsilon stay observed and are not duplicated.
/// Examples keep the dataset order. With WeightMode::ipw the result is passed
/// through ipw_weights.
AugmentedSet build_augmented(const Dataset& train, const ProbMap& decision_probs, const AugmentConfig& config);

/// Observed examples get weight min(1/p, clip); augmented examples keep 1.
AugmentedSet ipw_weights(AugmentedSet set, const ProbMap& decision_probs, double clip);

inline constexpr std::size_t kHistogramBins = 20;

struct PositivityReport {
    std::size_t n = 0;
    std::size_t below_epsilon = 0;
    double mass_below_epsilon = 0.0;
    std::size_t n_screened_in = 0;
    std::size_t n_screened_out = 0;
    /// Min / median propensity per decision group (0 when the group is empty).
    double min_screened_in = 0.0;
    double median_screened_in = 0.0;
    double min_screened_out = 0.0;
    double median_screened_out = 0.0;
    /// Equal-width bins over [0,1]; the last bin is closed on the right.
    std::array<std::size_t, kHistogramBins> histogram{};
};

/// Propensity diagnostics. `decisions` may be empty, in which case only the
/// pooled statistics are filled.
PositivityReport positivity_report(std::span<const double> probs, std::span<const int> decisions, double epsilon);
PositivityReport positivity_report(const Dataset& ds, const ProbMap& decision_probs, double epsilon);

nlohmann::json to_json(const PositivityReport& report);

/// `id,label,weight,provenance` audit export.
std::string augmented_to_csv(const AugmentedSet& set);
void save_augmented(const AugmentedSet& set, const std::filesystem::path& path);

/// Reads the audit export back, joining features from `ds` by id.
AugmentedSet load_augmented(const std::filesystem::path& path, const Dataset& ds);

}  // namespace selab

#endif  // SELAB_AUGMENT_HPP
