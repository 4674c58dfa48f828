#include "selab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace selab {

namespace {

std::string csv_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return format_double(v);
}

const char* to_string(ObservedOutcome o) {
    switch (o) {
        case ObservedOutcome::negative: return "0";
        case ObservedOutcome::positive: return "1";
        case ObservedOutcome::unobserved: return "?";
    }
    return "?";
}

double lookup(const ProbMap& probs, std::uint64_t id, const char* what) {
    const auto it = probs.find(id);
    if (it == probs.end()) throw DataError(std::string(what) + " missing id " + std::to_string(id));
    return it->second;
}

}  // namespace

RocCurve roc_and_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("roc: scores and labels differ in length");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw DataError("roc: labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("AUC undefined: labels contain a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    double area = 0.0;  // in count units, normalised at the end
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        std::size_t dtp = 0, dfp = 0;
        for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? dtp : dfp)++;
        area += static_cast<double>(dfp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(dtp));
        tp += dtp;
        fp += dfp;
        curve.points.push_back(
            {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    curve.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

double partial_auc(const RocCurve& curve, double max_fpr) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        if (a.fpr >= max_fpr) break;
        if (b.fpr == a.fpr) continue;
        const double hi = std::min(b.fpr, max_fpr);
        const double tpr_hi = a.tpr + (b.tpr - a.tpr) * (hi - a.fpr) / (b.fpr - a.fpr);
        area += (hi - a.fpr) * 0.5 * (a.tpr + tpr_hi);
    }
    return area;
}

CalibrationReport calibration(std::span<const double> probs, std::span<const int> labels, int n_bins) {
    if (probs.size() != labels.size()) throw DataError("calibration: probs and labels differ in length");
    if (probs.empty()) throw DataError("calibration: empty input");
    if (n_bins < 1) throw ConfigError("calibration: n_bins must be >= 1");

    CalibrationReport r;
    r.bins.resize(static_cast<std::size_t>(n_bins));
    std::vector<double> sum_p(r.bins.size(), 0.0), sum_y(r.bins.size(), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("calibration: probability outside [0,1]");
        const auto b = std::min(static_cast<std::size_t>(std::floor(p * n_bins)), r.bins.size() - 1);
        ++r.bins[b].count;
        sum_p[b] += p;
        sum_y[b] += labels[i];
    }
    const auto n = static_cast<double>(probs.size());
    for (std::size_t b = 0; b < r.bins.size(); ++b) {
        auto& bin = r.bins[b];
        bin.lower = static_cast<double>(b) / n_bins;
        bin.upper = static_cast<double>(b + 1) / n_bins;
        if (bin.count == 0) continue;
        const auto c = static_cast<double>(bin.count);
        bin.mean_predicted = sum_p[b] / c;
        bin.empirical_rate = sum_y[b] / c;
        r.ece += (c / n) * std::abs(bin.mean_predicted - bin.empirical_rate);
    }
    return r;
}

AgreementTable agreement_table(const Dataset& test, const ProbModel& decision_model, const ProbModel& outcome_model) {
    return agreement_table(test, predict_all(decision_model, test), predict_all(outcome_model, test));
}

AgreementTable agreement_table(const Dataset& test, const ProbMap& decision_scores, const ProbMap& outcome_scores) {
    AgreementTable t;
    t.rows.reserve(test.size());
    for (const auto& inst : test.instances) {
        AgreementRow row;
        row.id = inst.id;
        row.decision_score = lookup(decision_scores, inst.id, "decision scores");
        row.outcome_score = lookup(outcome_scores, inst.id, "outcome scores");
        if (inst.decision == 1 && inst.outcome)
            row.observed = *inst.outcome ? ObservedOutcome::positive : ObservedOutcome::negative;
        t.rows.push_back(row);
    }

    std::vector<std::size_t> order(t.rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        const auto& ra = t.rows[a];
        const auto& rb = t.rows[b];
        return ra.decision_score != rb.decision_score ? ra.decision_score < rb.decision_score : ra.id < rb.id;
    });
    t.deciles.resize(10);
    std::vector<double> sums(10, 0.0);
    const auto n = order.size();
    for (std::size_t rank = 0; rank < n; ++rank) {
        const auto& row = t.rows[order[rank]];
        const auto d = rank * 10 / n;
        auto& s = t.deciles[d];
        if (s.count == 0) s.min_decision_score = row.decision_score;
        s.max_decision_score = row.decision_score;
        ++s.count;
        sums[d] += row.outcome_score;
    }
    for (int d = 0; d < 10; ++d) {
        auto& s = t.deciles[static_cast<std::size_t>(d)];
        s.decile = d;
        if (s.count) s.mean_outcome_score = sums[static_cast<std::size_t>(d)] / static_cast<double>(s.count);
    }
    return t;
}

EvalReport evaluate_models(std::span<const NamedModel> models, const Dataset& test, const TruthTable* truth,
                           const ProbMap& decision_probs_test, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("evaluate: epsilon must lie in (0,1)");
    EvalReport report;
    report.epsilon = epsilon;
    report.n_test = test.size();

    std::vector<std::size_t> obs_idx, aug_idx;
    std::vector<int> obs_labels, aug_labels, full_labels, decisions;
    std::vector<double> decision_scores;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& inst = test.instances[i];
        const double p = lookup(decision_probs_test, inst.id, "decision probabilities");
        decision_scores.push_back(p);
        decisions.push_back(inst.decision);
        if (inst.decision == 1) {
            obs_idx.push_back(i);
            obs_labels.push_back(*inst.outcome);
            aug_idx.push_back(i);
            aug_labels.push_back(*inst.outcome);
        } else if (p < epsilon) {
            aug_idx.push_back(i);
            aug_labels.push_back(0);
        }
        if (truth) {
            const auto it = truth->find(inst.id);
            if (it == truth->end()) throw DataError("truth table missing test id " + std::to_string(inst.id));
            full_labels.push_back(it->second);
        }
    }
    report.n_observed_test = obs_idx.size();
    report.n_augmented_test = aug_idx.size();

    report.decision_calibration = calibration(decision_scores, decisions);
    for (double p : decision_scores)
        ++report.decision_histogram[std::min(static_cast<std::size_t>(std::floor(p * kHistogramBins)), kHistogramBins - 1)];

    ProbMap decision_map;
    for (std::size_t i = 0; i < test.size(); ++i) decision_map.emplace(test.instances[i].id, decision_scores[i]);

    for (const auto& [name, model] : models) {
        ModelEvaluation me;
        me.name = name;
        const auto scores = predict_all(model, test);
        std::vector<double> all(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) all[i] = scores.at(test.instances[i].id);
        auto pick = [&](const std::vector<std::size_t>& idx) {
            std::vector<double> out;
            out.reserve(idx.size());
            for (auto i : idx) out.push_back(all[i]);
            return out;
        };
        me.observed = roc_and_auc(pick(obs_idx), obs_labels);
        me.augmented = roc_and_auc(pick(aug_idx), aug_labels);
        me.partial_auc_observed = partial_auc(me.observed, kLowFprLimit);
        me.partial_auc_augmented = partial_auc(me.augmented, kLowFprLimit);
        if (truth) {
            me.full_truth = roc_and_auc(all, full_labels);
            me.partial_auc_full_truth = partial_auc(*me.full_truth, kLowFprLimit);
        }
        me.agreement = agreement_table(test, decision_map, scores);
        report.models.push_back(std::move(me));
    }
    return report;
}

nlohmann::json to_json(const RocCurve& curve) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : curve.points) {
        nlohmann::json thr = std::isinf(p.threshold) ? nlohmann::json("inf") : nlohmann::json(p.threshold);
        pts.push_back({p.fpr, p.tpr, thr});
    }
    return {{"auc", curve.auc}, {"points", std::move(pts)}};
}

nlohmann::json to_json(const CalibrationReport& report) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : report.bins)
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_predicted", b.mean_predicted},
                        {"empirical_rate", b.empirical_rate}});
    return {{"ece", report.ece}, {"bins", std::move(bins)}};
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : report.models) {
        nlohmann::json deciles = nlohmann::json::array();
        for (const auto& d : m.agreement.deciles)
            deciles.push_back({{"decile", d.decile},
                               {"count", d.count},
                               {"min_decision_score", d.min_decision_score},
                               {"max_decision_score", d.max_decision_score},
                               {"mean_outcome_score", d.mean_outcome_score}});
        nlohmann::json entry{{"name", m.name},
                             {"observed", to_json(m.observed)},
                             {"augmented", to_json(m.augmented)},
                             {"partial_auc_observed", m.partial_auc_observed},
                             {"partial_auc_augmented", m.partial_auc_augmented},
                             {"agreement_deciles", std::move(deciles)}};
        if (m.full_truth) {
            entry["full_truth"] = to_json(*m.full_truth);
            entry["partial_auc_full_truth"] = *m.partial_auc_full_truth;
        }
        models.push_back(std::move(entry));
    }
    return {{"epsilon", report.epsilon},
            {"low_fpr_limit", kLowFprLimit},
            {"n_test", report.n_test},
            {"n_observed_test", report.n_observed_test},
            {"n_augmented_test", report.n_augmented_test},
            {"decision_calibration", to_json(report.decision_calibration)},
            {"decision_histogram", report.decision_histogram},
            {"models", std::move(models)}};
}

std::vector<std::filesystem::path> write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = dir / name;
        write_text_file(path, text);
        written.push_back(path);
    };

    emit("report.json", to_json(report).dump(2) + "\n");

    auto roc_csv = [](const RocCurve& c) {
        std::string out = "fpr,tpr,threshold\n";
        for (const auto& p : c.points)
            out += format_double(p.fpr) + "," + format_double(p.tpr) + "," + csv_double(p.threshold) + "\n";
        return out;
    };
    for (const auto& m : report.models) {
        emit("roc_" + m.name + "_observed.csv", roc_csv(m.observed));
        emit("roc_" + m.name + "_augmented.csv", roc_csv(m.augmented));
        if (m.full_truth) emit("roc_" + m.name + "_full.csv", roc_csv(*m.full_truth));
    }

    std::string cal = "lower,upper,count,mean_predicted,empirical_rate\n";
    for (const auto& b : report.decision_calibration.bins)
        cal += format_double(b.lower) + "," + format_double(b.upper) + "," + std::to_string(b.count) + "," +
               format_double(b.mean_predicted) + "," + format_double(b.empirical_rate) + "\n";
    emit("calibration.csv", cal);

    std::string agree = "id,decision_score";
    for (const auto& m : report.models) agree += "," + m.name;
    agree += ",observed_outcome\n";
    if (!report.models.empty()) {
        const auto& rows = report.models.front().agreement.rows;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            agree += std::to_string(rows[i].id) + "," + format_double(rows[i].decision_score);
            for (const auto& m : report.models) agree += "," + format_double(m.agreement.rows[i].outcome_score);
            agree += std::string(",") + to_string(rows[i].observed) + "\n";
        }
    }
    emit("agreement.csv", agree);

    std::string hist = "lower,upper,count\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b)
        hist += format_double(static_cast<double>(b) / kHistogramBins) + "," +
                format_double(static_cast<double>(b + 1) / kHistogramBins) + "," +
                std::to_string(report.decision_histogram[b]) + "\n";
    emit("histogram.csv", hist);
    return written;
}

}  // namespace selab
