#ifndef SELAB_DATASET_HPP
#define SELAB_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "selab/common.hpp"

namespace selab {

/// One row of a selectively labeled dataset. `outcome` is present exactly
/// when `decision == 1`.
struct Instance {
    std::uint64_t id = 0;
    Eigen::VectorXd x;
    int decision = 0;
    std::optional<int> outcome;

    friend bool operator==(const Instance& a, const Instance& b) {
        return a.id == b.id && a.x.size() == b.x.size() && a.x == b.x &&
               a.decision == b.decision && a.outcome == b.outcome;
    }
};

struct Dataset {
    std::vector<Instance> instances;
    std::vector<std::string> feature_names;

    std::size_t size() const noexcept { return instances.size(); }
    bool empty() const noexcept { return instances.empty(); }
    Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(feature_names.size()); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class Provenance { observed, augmented };

const char* to_string(Provenance p) noexcept;
Provenance provenance_from_string(const std::string& s);

/// A training example: features, binary label, positive weight.
struct LabeledExample {
    std::uint64_t id = 0;
    Eigen::VectorXd x;
    int label = 0;
    double weight = 1.0;
    Provenance provenance = Provenance::observed;
};

/// Default feature names f0..f{k-1}.
std::vector<std::string> default_feature_names(Eigen::Index k);

/// Throws DataError if any dataset invariant is violated.
void validate(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Canonical CSV text for `ds` (what save_dataset writes).
std::string to_csv(const Dataset& ds);
/// Parses CSV text; row numbers in error messages count data rows from 1.
Dataset parse_dataset_csv(const std::string& text);

/// Seeded Fisher-Yates permutation then a cut at round(n * train_fraction).
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// The observed training set: every instance with d = 1, labeled by its outcome.
std::vector<LabeledExample> observed_subset(const Dataset& ds);

/// 17 significant digits, so every double round-trips exactly.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Reads and writes `id,prob` CSV files.
void save_prob_map(const ProbMap& probs, const std::filesystem::path& path);
ProbMap load_prob_map(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace selab

#endif  // SELAB_DATASET_HPP
