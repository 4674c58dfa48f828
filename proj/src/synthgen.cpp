#include "selab/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace selab {

Eigen::VectorXd default_beta(Eigen::Index k) {
    std::mt19937_64 rng(kDefaultBetaSeed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd beta(k);
    for (Eigen::Index j = 0; j < k; ++j) beta[j] = normal(rng);
    return beta;
}

DgpConfig DgpConfig::defaults() {
    DgpConfig c;
    c.beta = default_beta(10);
    return c;
}

void DgpConfig::validate() const {
    if (beta.size() < 1) throw ConfigError("dgp: k must be >= 1");
    if (!beta.allFinite() || !std::isfinite(beta0)) throw ConfigError("dgp: coefficients must be finite");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("dgp: gamma must be >= 0");
    if (!(expert_noise_sd >= 0.0) || !std::isfinite(expert_noise_sd))
        throw ConfigError("dgp: expert_noise_sd must be >= 0");
    if (!(t_low >= 0.0 && t_low < t_high && t_high <= 1.0))
        throw ConfigError("dgp: need 0 <= t_low < t_high <= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("dgp: alpha must be > 0");
}

void SemiSyntheticConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("semi_synthetic: threshold must lie in (0,1)");
}

double linear_score(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != config.k())
        throw DataError("dimension mismatch: x has " + std::to_string(x.size()) + ", dgp has " +
                        std::to_string(config.k()));
    return config.beta.dot(x) + config.beta0;
}

SyntheticData generate(const DgpConfig& config, std::size_t n, std::uint64_t seed) {
    config.validate();
    if (n == 0) throw ConfigError("generate: n must be positive");

    const auto k = config.k();
    SyntheticData out;
    out.dataset.feature_names = default_feature_names(k);
    out.dataset.instances.resize(n);
    out.expert_scores.resize(n);
    std::vector<int> truth(n);

    parallel_for(n, [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(seed, i));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        Instance& inst = out.dataset.instances[i];
        inst.id = i;
        inst.x.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) inst.x[j] = normal(rng);
        const double u = normal(rng);
        const double eta = config.expert_noise_sd * normal(rng);
        const double u_y = unif(rng);
        const double u_d = unif(rng);

        const double score = config.beta.dot(inst.x) + config.beta0 + config.gamma * u;
        const int y = u_y < sigmoid(score) ? 1 : 0;
        const double s = sigmoid(config.alpha * score + eta);
        int d;
        if (s < config.t_low)
            d = 0;
        else if (s > config.t_high)
            d = 1;
        else
            d = u_d < s ? 1 : 0;

        inst.decision = d;
        if (d == 1) inst.outcome = y;
        out.expert_scores[i] = s;
        truth[i] = y;
    });

    out.truth.emplace();
    for (std::size_t i = 0; i < n; ++i) out.truth->emplace_hint(out.truth->end(), i, truth[i]);
    return out;
}

double true_propensity(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double a = config.alpha * linear_score(config, x);
    const double ag = config.alpha * config.gamma;
    const double tau = std::sqrt(ag * ag + config.expert_noise_sd * config.expert_noise_sd);

    if (tau == 0.0) {
        const double s = sigmoid(a);
        if (s < config.t_low) return 0.0;
        if (s > config.t_high) return 1.0;
        return s;
    }

    // Total noise z = alpha*gamma*u + eta ~ N(0, tau^2); s = sigmoid(a + z).
    const double upper = logit(config.t_high) - a;  // z above this: screened in for sure
    const double lower = logit(config.t_low) - a;   // z below this: screened out for sure
    const double p_forced_in = std::isfinite(upper) ? 0.5 * std::erfc(upper / (tau * std::sqrt(2.0))) : 0.0;

    const double lim = 12.0 * tau;
    const double lo = std::max(lower, -lim);
    const double hi = std::min(upper, lim);
    double p_coin = 0.0;
    if (lo < hi) {
        const double norm = 1.0 / (tau * std::sqrt(2.0 * M_PI));
        auto integrand = [&](double z) {
            return sigmoid(a + z) * norm * std::exp(-0.5 * (z / tau) * (z / tau));
        };
        p_coin = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-13);
    }
    return std::clamp(p_forced_in + p_coin, 0.0, 1.0);
}

SyntheticData semi_synthetic_transform(const SyntheticData& data, const ProbMap& decision_probs,
                                       const SemiSyntheticConfig& config) {
    config.validate();
    SyntheticData out;
    out.dataset.feature_names = data.dataset.feature_names;
    out.dataset.instances.reserve(data.dataset.size());
    if (data.truth) out.truth.emplace();

    for (const auto& inst : data.dataset.instances) {
        const auto it = decision_probs.find(inst.id);
        if (it == decision_probs.end())
            throw DataError("decision probabilities missing id " + std::to_string(inst.id));
        const double p = it->second;
        if (!(p >= 0.0 && p <= 1.0))
            throw DataError("decision probability outside [0,1] for id " + std::to_string(inst.id));

        Instance next = inst;
        int truth_label = 0;
        if (p > config.threshold) {
            if (data.truth) {
                const auto t = data.truth->find(inst.id);
                if (t == data.truth->end())
                    throw DataError("truth table missing id " + std::to_string(inst.id));
                truth_label = t->second;
            }
        } else {
            next.decision = 0;
            next.outcome.reset();
        }
        if (out.truth) out.truth->emplace(inst.id, truth_label);
        out.dataset.instances.push_back(std::move(next));
    }
    return out;
}

const TruthTable& ground_truth_table(const SyntheticData& data) {
    if (!data.truth) throw DataError("ground truth was not retained for this dataset");
    return *data.truth;
}

void save_truth(const TruthTable& truth, const std::filesystem::path& path) {
    std::string out = "id,y_true\n";
    for (const auto& [id, y] : truth) out += std::to_string(id) + "," + std::to_string(y) + "\n";
    write_text_file(path, out);
}

TruthTable load_truth(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || (line != "id,y_true" && line != "id,y_true\r"))
        throw DataError(path.string() + ": header must be id,y_true");
    TruthTable truth;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw DataError(path.string() + ": row " + std::to_string(row) + ": expected 2 columns");
        const auto id_text = line.substr(0, comma);
        const auto y_text = line.substr(comma + 1);
        if (y_text != "0" && y_text != "1")
            throw DataError(path.string() + ": row " + std::to_string(row) + ": y_true must be 0 or 1");
        std::uint64_t id = 0;
        const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (ec != std::errc{} || ptr != id_text.data() + id_text.size() || id_text.empty())
            throw DataError(path.string() + ": row " + std::to_string(row) + ": invalid id");
        if (!truth.emplace(id, y_text == "1" ? 1 : 0).second)
            throw DataError(path.string() + ": row " + std::to_string(row) + ": duplicate id");
    }
    return truth;
}

}  // namespace selab
