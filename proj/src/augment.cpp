#include "selab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <unordered_map>

namespace selab {

namespace {

double lookup(const ProbMap& probs, std::uint64_t id) {
    const auto it = probs.find(id);
    if (it == probs.end()) throw DataError("missing decision probability for id " + std::to_string(id));
    if (!(it->second >= 0.0 && it->second <= 1.0))
        throw DataError("decision probability outside [0,1] for id " + std::to_string(id));
    return it->second;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::size_t histogram_bin(double p) {
    const auto b = static_cast<std::size_t>(std::floor(p * static_cast<double>(kHistogramBins)));
    return std::min(b, kHistogramBins - 1);
}

}  // namespace

void AugmentConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("augment: epsilon must lie in (0,1)");
    if (!(clip > 1.0) || !std::isfinite(clip)) throw ConfigError("augment: clip must be a finite value > 1");
}

AugmentedSet build_augmented(const Dataset& train, const ProbMap& decision_probs, const AugmentConfig& config) {
    config.validate();
    AugmentedSet set;
    set.examples.reserve(train.size());
    for (const auto& inst : train.instances) {
        const double p = lookup(decision_probs, inst.id);
        if (inst.decision == 1) {
            if (!inst.outcome) throw InvariantError("observed instance without outcome");
            set.examples.push_back({inst.id, inst.x, *inst.outcome, 1.0, Provenance::observed});
            ++set.stats.observed;
            if (p < config.epsilon) ++set.stats.skipped_already_observed;
        } else if (p < config.epsilon) {
            set.examples.push_back({inst.id, inst.x, inst.decision, 1.0, Provenance::augmented});
            ++set.stats.augmented;
        } else {
            ++set.stats.excluded;
        }
    }
    if (config.weight_mode == WeightMode::ipw) return ipw_weights(std::move(set), decision_probs, config.clip);
    return set;
}

AugmentedSet ipw_weights(AugmentedSet set, const ProbMap& decision_probs, double clip) {
    if (!(clip > 1.0) || !std::isfinite(clip)) throw ConfigError("ipw: clip must be a finite value > 1");
    for (auto& e : set.examples) {
        if (e.provenance == Provenance::augmented) {
            e.weight = 1.0;
            continue;
        }
        const double p = lookup(decision_probs, e.id);
        if (p <= 0.0)
            throw DataError("zero decision probability for observed id " + std::to_string(e.id) +
                            "; inverse weight undefined");
        e.weight = std::min(1.0 / p, clip);
    }
    return set;
}

PositivityReport positivity_report(std::span<const double> probs, std::span<const int> decisions, double epsilon) {
    if (!decisions.empty() && decisions.size() != probs.size())
        throw DataError("positivity_report: probabilities and decisions differ in length");
    PositivityReport r;
    r.n = probs.size();
    std::vector<double> in, out;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("positivity_report: probability outside [0,1]");
        if (p < epsilon) ++r.below_epsilon;
        ++r.histogram[histogram_bin(p)];
        if (!decisions.empty()) (decisions[i] == 1 ? in : out).push_back(p);
    }
    if (r.n > 0) r.mass_below_epsilon = static_cast<double>(r.below_epsilon) / static_cast<double>(r.n);
    r.n_screened_in = in.size();
    r.n_screened_out = out.size();
    if (!in.empty()) r.min_screened_in = *std::min_element(in.begin(), in.end());
    if (!out.empty()) r.min_screened_out = *std::min_element(out.begin(), out.end());
    r.median_screened_in = median(std::move(in));
    r.median_screened_out = median(std::move(out));
    return r;
}

PositivityReport positivity_report(const Dataset& ds, const ProbMap& decision_probs, double epsilon) {
    std::vector<double> probs;
    std::vector<int> decisions;
    probs.reserve(ds.size());
    decisions.reserve(ds.size());
    for (const auto& inst : ds.instances) {
        probs.push_back(lookup(decision_probs, inst.id));
        decisions.push_back(inst.decision);
    }
    return positivity_report(probs, decisions, epsilon);
}

nlohmann::json to_json(const PositivityReport& r) {
    return {{"n", r.n},
            {"below_epsilon", r.below_epsilon},
            {"mass_below_epsilon", r.mass_below_epsilon},
            {"screened_in", {{"n", r.n_screened_in}, {"min", r.min_screened_in}, {"median", r.median_screened_in}}},
            {"screened_out",
             {{"n", r.n_screened_out}, {"min", r.min_screened_out}, {"median", r.median_screened_out}}},
            {"histogram", r.histogram}};
}

std::string augmented_to_csv(const AugmentedSet& set) {
    std::string out = "id,label,weight,provenance\n";
    for (const auto& e : set.examples)
        out += std::to_string(e.id) + "," + std::to_string(e.label) + "," + format_double(e.weight) + "," +
               to_string(e.provenance) + "\n";
    return out;
}

void save_augmented(const AugmentedSet& set, const std::filesystem::path& path) {
    write_text_file(path, augmented_to_csv(set));
}

AugmentedSet load_augmented(const std::filesystem::path& path, const Dataset& ds) {
    std::unordered_map<std::uint64_t, const Instance*> by_id;
    for (const auto& inst : ds.instances) by_id.emplace(inst.id, &inst);

    std::istringstream in(read_text_file(path));
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,label,weight,provenance")
        throw DataError(path.string() + ": header must be id,label,weight,provenance");

    AugmentedSet set;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        const auto where = path.string() + ": row " + std::to_string(row) + ": ";
        if (f.size() != 4) throw DataError(where + "expected 4 columns");
        std::uint64_t id = 0;
        try {
            std::size_t used = 0;
            id = std::stoull(f[0], &used);
            if (used != f[0].size()) throw DataError("");
        } catch (...) {
            throw DataError(where + "invalid id");
        }
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError(where + "id " + f[0] + " not in dataset");
        if (f[1] != "0" && f[1] != "1") throw DataError(where + "label must be 0 or 1");
        LabeledExample e{id, it->second->x, f[1] == "1" ? 1 : 0, parse_double(f[2]), provenance_from_string(f[3])};
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw DataError(where + "weight must be positive");
        if (e.provenance == Provenance::augmented && it->second->decision != 0)
            throw DataError(where + "augmented example from a screened-in instance");
        (e.provenance == Provenance::observed ? set.stats.observed : set.stats.augmented)++;
        set.examples.push_back(std::move(e));
    }
    return set;
}

}  // namespace selab
