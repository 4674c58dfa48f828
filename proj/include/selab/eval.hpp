#ifndef SELAB_EVAL_HPP
#define SELAB_EVAL_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "selab/augment.hpp"
#include "selab/dataset.hpp"
#include "selab/learners.hpp"
#include "selab/synthgen.hpp"

namespace selab {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    /// Scores >= threshold are called positive; +inf for the (0,0) point.
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// ROC sweep over distinct scores in descending order; tied scores move the
/// curve in a single diagonal step, so the trapezoidal AUC equals the
/// Mann-Whitney statistic with half credit for ties.
RocCurve roc_and_auc(std::span<const double> scores, std::span<const int> labels);

/// Area under the curve restricted to fpr in [0, max_fpr] (unnormalised).
double partial_auc(const RocCurve& curve, double max_fpr);

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_predicted = 0.0;
    double empirical_rate = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;
    double ece = 0.0;
};

/// Equal-width reliability bins over [0,1], last bin closed on the right.
CalibrationReport calibration(std::span<const double> probs, std::span<const int> labels, int n_bins = 10);

enum class ObservedOutcome { negative, positive, unobserved };

struct AgreementRow {
    std::uint64_t id = 0;
    double decision_score = 0.0;
    double outcome_score = 0.0;
    ObservedOutcome observed = ObservedOutcome::unobserved;
};

struct DecileSummary {
    int decile = 0;
    std::size_t count = 0;
    double min_decision_score = 0.0;
    double max_decision_score = 0.0;
    double mean_outcome_score = 0.0;
};

/// Per-instance decision and outcome scores, plus the mean outcome score
/// within each decile of the decision score (deciles by rank, ties broken
/// by id).
struct AgreementTable {
    std::vector<AgreementRow> rows;
    std::vector<DecileSummary> deciles;
};

AgreementTable agreement_table(const Dataset& test, const ProbModel& decision_model, const ProbModel& outcome_model);
AgreementTable agreement_table(const Dataset& test, const ProbMap& decision_scores, const ProbMap& outcome_scores);

inline constexpr double kLowFprLimit = 0.2;

struct ModelEvaluation {
    std::string name;
    RocCurve observed;
    RocCurve augmented;
    std::optional<RocCurve> full_truth;
    double partial_auc_observed = 0.0;
    double partial_auc_augmented = 0.0;
    std::optional<double> partial_auc_full_truth;
    AgreementTable agreement;
};

struct EvalReport {
    double epsilon = 0.0;
    std::size_t n_test = 0;
    std::size_t n_observed_test = 0;
    std::size_t n_augmented_test = 0;
    std::vector<ModelEvaluation> models;
    CalibrationReport decision_calibration;
    std::array<std::size_t, kHistogramBins> decision_histogram{};
};

using NamedModel = std::pair<std::string, ProbModel>;

/// Scores every model on
///   the observed test set  {d = 1}, labels y;
///   the augmented test set {d = 1} u {decision prob < epsilon}, labels y or 0;
///   every test instance against `truth`, when given.
EvalReport evaluate_models(std::span<const NamedModel> models, const Dataset& test, const TruthTable* truth,
                           const ProbMap& decision_probs_test, double epsilon);

nlohmann::json to_json(const RocCurve& curve);
nlohmann::json to_json(const CalibrationReport& report);
nlohmann::json to_json(const EvalReport& report);

/// Writes report.json, roc_<model>_<testset>.csv, calibration.csv,
/// agreement.csv and histogram.csv into `dir`. Returns the paths written.
std::vector<std::filesystem::path> write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace selab

#endif  // SELAB_EVAL_HPP
