#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "selab/eval.hpp"
#include "selab/learners.hpp"
#include "selab/synthgen.hpp"

using namespace selab;

namespace {

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Monte-Carlo estimate of P(s < t_low) straight from the generative story.
double mc_forced_out(const DgpConfig& c, int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    int hits = 0;
    Eigen::VectorXd x(c.k());
    for (int i = 0; i < draws; ++i) {
        for (Eigen::Index j = 0; j < c.k(); ++j) x[j] = normal(rng);
        const double score = c.beta.dot(x) + c.beta0 + c.gamma * normal(rng);
        const double s = expit(c.alpha * score + c.expert_noise_sd * normal(rng));
        hits += s < c.t_low;
    }
    return static_cast<double>(hits) / draws;
}

// Monte-Carlo estimate of P(d = 1 | x).
double mc_propensity(const DgpConfig& c, const Eigen::VectorXd& x, int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    int hits = 0;
    for (int i = 0; i < draws; ++i) {
        const double score = c.beta.dot(x) + c.beta0 + c.gamma * normal(rng);
        const double s = expit(c.alpha * score + c.expert_noise_sd * normal(rng));
        const double coin = unif(rng);
        hits += s > c.t_high || (s >= c.t_low && coin < s);
    }
    return static_cast<double>(hits) / draws;
}

SyntheticData tiny(const std::vector<int>& d, const std::vector<int>& y) {
    SyntheticData data;
    data.dataset.feature_names = default_feature_names(1);
    data.truth.emplace();
    for (std::size_t i = 0; i < d.size(); ++i) {
        Instance inst{i, Eigen::VectorXd::Constant(1, static_cast<double>(i)), d[i], std::nullopt};
        if (d[i]) inst.outcome = y[i];
        data.dataset.instances.push_back(inst);
        (*data.truth)[i] = y[i];
    }
    return data;
}

}  // namespace

TEST(DgpConfig, DefaultsAndValidation) {
    const auto c = DgpConfig::defaults();
    EXPECT_EQ(c.k(), 10);
    EXPECT_EQ(c.beta0, -1.0);
    EXPECT_EQ(c.gamma, 0.0);
    EXPECT_EQ(c.t_low, 0.08);
    EXPECT_EQ(c.t_high, 0.6);
    EXPECT_EQ(default_beta(10), c.beta);
    auto bad = c;
    bad.t_low = 0.7;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.gamma = -1;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(generate(c, 0, 1), ConfigError);
}

TEST(Generate, DefaultScreenOutMassIsTenToTwentyPercent) {
    const double p = mc_forced_out(DgpConfig::defaults(), 1'000'000, 99);
    EXPECT_GT(p, 0.10);
    EXPECT_LT(p, 0.20);
}

TEST(Generate, CensoringConvention) {
    const auto data = generate(DgpConfig::defaults(), 2000, 4);
    ASSERT_TRUE(data.truth);
    for (const auto& inst : data.dataset.instances) {
        EXPECT_EQ(inst.outcome.has_value(), inst.decision == 1);
        if (inst.outcome) EXPECT_EQ(*inst.outcome, data.truth->at(inst.id));
    }
    EXPECT_NO_THROW(validate(data.dataset));
}

TEST(Generate, Deterministic) {
    const auto c = DgpConfig::defaults();
    const auto a = generate(c, 500, 17);
    const auto b = generate(c, 500, 17);
    EXPECT_EQ(a.dataset, b.dataset);
    EXPECT_EQ(*a.truth, *b.truth);
    EXPECT_NE(a.dataset, generate(c, 500, 18).dataset);
}

TEST(Generate, InstanceStreamsIndependentOfN) {
    const auto c = DgpConfig::defaults();
    const auto small = generate(c, 50, 3);
    const auto large = generate(c, 200, 3);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(small.dataset.instances[i], large.dataset.instances[i]);
}

TEST(Generate, NoDeterministicRegionGivesCoinFlips) {
    auto c = DgpConfig::defaults();
    c.t_low = 0.0;
    c.t_high = 1.0;
    c.expert_noise_sd = 0.0;
    const std::size_t n = 40000;
    const auto data = generate(c, n, 8);
    double expected = 0.0, observed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& inst = data.dataset.instances[i];
        const double p = expit(c.alpha * linear_score(c, inst.x));
        EXPECT_DOUBLE_EQ(data.expert_scores[i], p);
        EXPECT_DOUBLE_EQ(true_propensity(c, inst.x), p);
        EXPECT_GT(true_propensity(c, inst.x), 0.0);
        expected += p;
        observed += inst.decision;
    }
    // Sum of independent Bernoullis: sd at most sqrt(n)/2.
    EXPECT_LT(std::abs(observed - expected), 4.0 * std::sqrt(n) / 2.0);
}

TEST(Generate, ForcedOutFractionMatchesMonteCarlo) {
    auto c = DgpConfig::defaults();
    c.beta0 = -3.0;
    const std::size_t n = 50000;
    const auto data = generate(c, n, 21);
    double forced = 0;
    for (double s : data.expert_scores) forced += s < c.t_low;
    const double f = forced / n;
    const int draws = 1'000'000;
    const double p = mc_forced_out(c, draws, 5);
    ASSERT_GT(p, 0.0);
    const double se = std::sqrt(p * (1 - p) / n + p * (1 - p) / draws);
    EXPECT_LT(std::abs(f - p), 3 * se) << "generated " << f << " vs monte carlo " << p;
    for (std::size_t i = 0; i < n; ++i)
        if (data.expert_scores[i] < c.t_low) EXPECT_EQ(data.dataset.instances[i].decision, 0);
}

TEST(TruePropensity, MatchesMonteCarlo) {
    for (double gamma : {0.0, 0.7}) {
        auto c = DgpConfig::defaults();
        c.gamma = gamma;
        std::mt19937_64 rng(12);
        std::normal_distribution<double> normal;
        for (int trial = 0; trial < 8; ++trial) {
            Eigen::VectorXd x(c.k());
            for (auto& v : x) v = normal(rng);
            const int draws = 200000;
            const double mc = mc_propensity(c, x, draws, 100 + trial);
            const double p = true_propensity(c, x);
            const double se = std::sqrt(std::max(mc * (1 - mc), 1e-4) / draws);
            EXPECT_NEAR(p, mc, 4 * se) << "gamma " << gamma << " trial " << trial;
        }
    }
}

TEST(TruePropensity, PositiveWithoutScreenOutRegion) {
    auto c = DgpConfig::defaults();
    c.t_low = 0.0;
    const auto data = generate(c, 3000, 2);
    for (const auto& inst : data.dataset.instances) EXPECT_GT(true_propensity(c, inst.x), 0.0);
}

TEST(Generate, IgnorabilityWithoutUnobservables) {
    // gamma = 0: a model fit on screened-in data agrees with one fit on fully
    // observed data wherever screening-in is likely.
    auto c = DgpConfig::defaults();
    const std::size_t n = 50000;
    const auto train = generate(c, n, 31);
    const auto test = generate(c, n, 32);

    std::vector<LabeledExample> full, screened;
    for (const auto& inst : train.dataset.instances) {
        LabeledExample e{inst.id, inst.x, train.truth->at(inst.id), 1.0, Provenance::observed};
        full.push_back(e);
        if (inst.decision) screened.push_back(e);
    }
    const auto m_full = fit_logistic(full, {}, 0);
    const auto m_screened = fit_logistic(screened, {}, 0);

    std::vector<double> s_full, s_screened;
    std::vector<int> labels;
    for (const auto& inst : test.dataset.instances) {
        if (true_propensity(c, inst.x) < 0.5) continue;
        s_full.push_back(predict_proba(ProbModel{m_full}, inst.x));
        s_screened.push_back(predict_proba(ProbModel{m_screened}, inst.x));
        labels.push_back(test.truth->at(inst.id));
    }
    const double gap = std::abs(roc_and_auc(s_full, labels).auc - roc_and_auc(s_screened, labels).auc);
    EXPECT_LT(gap, 0.02);
}

TEST(SemiSynthetic, ConfidentScreenInUnchanged) {
    const auto data = tiny({1}, {1});
    const auto out = semi_synthetic_transform(data, {{0, 0.95}}, {});
    EXPECT_EQ(out.dataset, data.dataset);
    EXPECT_EQ(out.truth->at(0), 1);
}

TEST(SemiSynthetic, UnconfidentScreenInBecomesNegative) {
    const auto out = semi_synthetic_transform(tiny({1}, {1}), {{0, 0.6}}, {});
    EXPECT_EQ(out.dataset.instances[0].decision, 0);
    EXPECT_FALSE(out.dataset.instances[0].outcome);
    EXPECT_EQ(ground_truth_table(out).at(0), 0);
}

TEST(SemiSynthetic, ThresholdItselfIsNotConfident) {
    const auto out = semi_synthetic_transform(tiny({1}, {1}), {{0, 0.9}}, {});
    EXPECT_EQ(out.dataset.instances[0].decision, 0);
}

TEST(SemiSynthetic, CertainProbsAreIdentity) {
    const auto data = generate(DgpConfig::defaults(), 500, 6);
    ProbMap ones;
    for (const auto& inst : data.dataset.instances) ones[inst.id] = 1.0;
    const auto out = semi_synthetic_transform(data, ones, {});
    EXPECT_EQ(out.dataset, data.dataset);
    EXPECT_EQ(*out.truth, *data.truth);
}

TEST(SemiSynthetic, MonotoneAndTruthConsistent) {
    const auto data = generate(DgpConfig::defaults(), 3000, 7);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif;
    ProbMap probs;
    for (const auto& inst : data.dataset.instances) probs[inst.id] = unif(rng);
    const SemiSyntheticConfig cfg{0.9};
    const auto out = semi_synthetic_transform(data, probs, cfg);
    const auto& truth = ground_truth_table(out);
    for (std::size_t i = 0; i < data.dataset.size(); ++i) {
        const auto& before = data.dataset.instances[i];
        const auto& after = out.dataset.instances[i];
        EXPECT_LE(after.decision, before.decision);
        EXPECT_EQ(after.outcome.has_value(), after.decision == 1);
        if (probs[before.id] <= cfg.threshold)
            EXPECT_EQ(truth.at(before.id), 0);
        else
            EXPECT_EQ(truth.at(before.id), data.truth->at(before.id));
        if (after.outcome) EXPECT_EQ(*after.outcome, truth.at(after.id));
    }
}

TEST(SemiSynthetic, Errors) {
    const auto data = tiny({1, 0}, {1, 0});
    EXPECT_THROW(semi_synthetic_transform(data, {{0, 0.95}}, {}), DataError);
    EXPECT_THROW(semi_synthetic_transform(data, {{0, 0.95}, {1, 1.5}}, {}), DataError);
    EXPECT_THROW(semi_synthetic_transform(data, {{0, 0.95}, {1, 0.1}}, {1.0}), ConfigError);
}

TEST(GroundTruth, MissingTruthIsAnError) {
    SyntheticData real;
    real.dataset = tiny({1}, {1}).dataset;
    EXPECT_THROW(ground_truth_table(real), DataError);
    const auto out = semi_synthetic_transform(real, {{0, 0.95}}, {});
    EXPECT_FALSE(out.truth);
}

TEST(GroundTruth, FileRoundTrip) {
    const auto data = generate(DgpConfig::defaults(), 100, 1);
    const auto path = std::filesystem::temp_directory_path() / "selab_truth_test.csv";
    save_truth(*data.truth, path);
    EXPECT_EQ(load_truth(path), *data.truth);
    write_text_file(path, "id,y_true\n0,2\n");
    EXPECT_THROW(load_truth(path), DataError);
}
