#ifndef SELAB_SYNTHGEN_HPP
#define SELAB_SYNTHGEN_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "selab/dataset.hpp"

namespace selab {

/// Parameters of the synthetic selective-labels process.
///
/// Outcome risk is r = sigmoid(beta.x + beta0 + gamma*u) with an unobserved
/// u ~ N(0,1). The expert scores s = sigmoid(alpha*(beta.x + beta0 + gamma*u) + eta),
/// eta ~ N(0, expert_noise_sd^2), screens out deterministically when s < t_low,
/// screens in deterministically when s > t_high and otherwise flips a coin with
/// probability s. gamma = 0 makes Y independent of D given X.
struct DgpConfig {
    Eigen::VectorXd beta;
    double beta0 = -1.0;
    double gamma = 0.0;
    double expert_noise_sd = 0.3;
    double t_low = 0.08;
    double t_high = 0.6;
    double alpha = 1.0;

    Eigen::Index k() const noexcept { return beta.size(); }

    /// k = 10 with beta drawn once from N(0,1) under a fixed seed.
    static DgpConfig defaults();
    void validate() const;
};

/// Seed of the one-time draw of default coefficients.
inline constexpr std::uint64_t kDefaultBetaSeed = 253;

/// beta ~ N(0,1)^k drawn with kDefaultBetaSeed.
Eigen::VectorXd default_beta(Eigen::Index k);

struct SemiSyntheticConfig {
    double threshold = 0.9;
    void validate() const;
};

/// id -> ground-truth binary outcome.
using TruthTable = std::map<std::uint64_t, int>;

/// A dataset together with the ground truth the censoring hides.
struct SyntheticData {
    Dataset dataset;
    std::optional<TruthTable> truth;
    /// Expert scores s per instance, aligned with dataset.instances. Only
    /// populated by generate().
    std::vector<double> expert_scores;
};

/// Draws n instances. Instance i (id = i) uses its own random stream derived
/// from (seed, i), so output is independent of generation order.
SyntheticData generate(const DgpConfig& config, std::size_t n, std::uint64_t seed);

/// beta.x + beta0, the observable part of the outcome log-odds.
double linear_score(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Exact P(d = 1 | x) under the DGP, integrating out u and eta.
double true_propensity(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Relabels so the expert only screens in when confident:
///   prob > threshold  -> (d, y) unchanged
///   prob <= threshold -> d = 0, truth y = 0 (the stored outcome becomes absent)
/// The truth table is carried forward when the input has one.
SyntheticData semi_synthetic_transform(const SyntheticData& data, const ProbMap& decision_probs,
                                       const SemiSyntheticConfig& config);

/// Returns the retained truth; throws DataError when there is none.
const TruthTable& ground_truth_table(const SyntheticData& data);

void save_truth(const TruthTable& truth, const std::filesystem::path& path);
TruthTable load_truth(const std::filesystem::path& path);

}  // namespace selab

#endif  // SELAB_SYNTHGEN_HPP
