#include "selab/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace selab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_examples(std::span<const LabeledExample> examples) {
    if (examples.size() < 2)
        throw DataError("need at least 2 examples to fit, got " + std::to_string(examples.size()));
}

// Per-feature row orderings by ascending feature value (ties by row index).
using SortedColumns = std::vector<std::vector<int>>;

SortedColumns presort(const Eigen::MatrixXd& X) {
    SortedColumns cols(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& order = cols[static_cast<std::size_t>(f)];
        order.resize(static_cast<std::size_t>(X.rows()));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }
    return cols;
}

// Greedy CART growth over presorted columns. Every node owns the same
// contiguous range [begin, end) in each column; a split stably partitions
// all columns so the children stay sorted.
class TreeGrower {
public:
    TreeGrower(const TrainingSet& data, const Eigen::VectorXd& weights, const SortedColumns& global_order,
               const TreeParams& params, std::mt19937_64& rng)
        : data_(data), w_(weights), params_(params), rng_(rng),
          k_(static_cast<int>(data.X.cols())), mtry_(params.resolved_mtry(data.X.cols())),
          go_left_(static_cast<std::size_t>(data.X.rows()), 0) {
        cols_.resize(global_order.size());
        for (std::size_t f = 0; f < global_order.size(); ++f) {
            cols_[f].reserve(global_order[f].size());
            for (int r : global_order[f])
                if (w_[r] > 0) cols_[f].push_back(r);
        }
        scratch_.resize(cols_.empty() ? 0 : cols_[0].size());
        features_.resize(static_cast<std::size_t>(k_));
    }

    TreeModel grow() {
        TreeModel tree;
        tree.k = k_;
        const int n = cols_.empty() ? 0 : static_cast<int>(cols_[0].size());
        if (n == 0) throw DataError("fit_tree: no examples with positive weight");
        nodes_ = &tree.nodes;
        build(0, n, 0);
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    int build(int begin, int end, int depth) {
        double wpos = 0.0, wneg = 0.0;
        for (int i = begin; i < end; ++i) {
            const int r = cols_[0][static_cast<std::size_t>(i)];
            (data_.y[r] > 0.5 ? wpos : wneg) += w_[r];
        }
        const int index = static_cast<int>(nodes_->size());
        nodes_->push_back({});
        (*nodes_)[static_cast<std::size_t>(index)].prob =
            (wpos + params_.laplace) / (wpos + wneg + 2.0 * params_.laplace);

        const int count = end - begin;
        if (depth >= params_.max_depth || count < 2 * params_.min_leaf || wpos <= 0.0 || wneg <= 0.0)
            return index;

        const Split best = find_split(begin, end, wpos, wneg);
        if (best.feature < 0) return index;

        const int mid = partition(begin, end, best);
        auto& node = (*nodes_)[static_cast<std::size_t>(index)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.gain = best.gain;
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid, end, depth + 1);
        (*nodes_)[static_cast<std::size_t>(index)].left = left;
        (*nodes_)[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    Split find_split(int begin, int end, double wpos, double wneg) {
        std::iota(features_.begin(), features_.end(), 0);
        for (int i = 0; i < mtry_; ++i) {
            std::uniform_int_distribution<int> pick(i, k_ - 1);
            std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(pick(rng_))]);
        }
        std::sort(features_.begin(), features_.begin() + mtry_);

        const double total = wpos + wneg;
        const double parent = wpos * wneg / total;
        const double min_gain = 1e-12 * total;
        Split best;
        for (int t = 0; t < mtry_; ++t) {
            const int f = features_[static_cast<std::size_t>(t)];
            const auto& col = cols_[static_cast<std::size_t>(f)];
            double lpos = 0.0, lneg = 0.0;
            for (int i = begin; i + 1 < end; ++i) {
                const int r = col[static_cast<std::size_t>(i)];
                (data_.y[r] > 0.5 ? lpos : lneg) += w_[r];
                const int left_count = i + 1 - begin;
                if (left_count < params_.min_leaf) continue;
                if (end - i - 1 < params_.min_leaf) break;
                const double a = data_.X(r, f);
                const double b = data_.X(col[static_cast<std::size_t>(i) + 1], f);
                if (!(a < b)) continue;

                const double lw = lpos + lneg;
                const double rpos = wpos - lpos, rneg = wneg - lneg;
                const double rw = rpos + rneg;
                // Weighted Gini decrease: W*G(parent) - WL*G(left) - WR*G(right), G = 2p(1-p).
                const double gain = 2.0 * (parent - lpos * lneg / lw - rpos * rneg / rw);
                const double bar = std::max(min_gain, best.gain + 1e-12 * std::abs(best.gain));
                if (gain > bar) {
                    double thr = a + 0.5 * (b - a);
                    if (!(thr < b)) thr = a;
                    best = {f, thr, gain};
                }
            }
        }
        return best;
    }

    int partition(int begin, int end, const Split& split) {
        const auto& key = cols_[static_cast<std::size_t>(split.feature)];
        int n_left = 0;
        for (int i = begin; i < end; ++i) {
            const int r = key[static_cast<std::size_t>(i)];
            const bool left = data_.X(r, split.feature) <= split.threshold;
            go_left_[static_cast<std::size_t>(r)] = left;
            n_left += left;
        }
        for (auto& col : cols_) {
            int l = begin;
            int s = 0;
            for (int i = begin; i < end; ++i) {
                const int r = col[static_cast<std::size_t>(i)];
                if (go_left_[static_cast<std::size_t>(r)])
                    col[static_cast<std::size_t>(l++)] = r;
                else
                    scratch_[static_cast<std::size_t>(s++)] = r;
            }
            std::copy(scratch_.begin(), scratch_.begin() + s, col.begin() + l);
        }
        return begin + n_left;
    }

    const TrainingSet& data_;
    const Eigen::VectorXd& w_;
    const TreeParams& params_;
    std::mt19937_64& rng_;
    int k_;
    int mtry_;
    SortedColumns cols_;
    std::vector<char> go_left_;
    std::vector<int> scratch_;
    std::vector<int> features_;
    std::vector<TreeNode>* nodes_ = nullptr;
};

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

int TreeParams::resolved_mtry(Eigen::Index k) const {
    if (mtry) return *mtry;
    return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
}

void TreeParams::validate(Eigen::Index k) const {
    if (max_depth < 1) throw ConfigError("tree: max_depth must be >= 1");
    if (min_leaf < 1) throw ConfigError("tree: min_leaf must be >= 1");
    const int m = resolved_mtry(k);
    if (m < 1 || m > k) throw ConfigError("tree: mtry must lie in [1, k]");
    if (!(laplace >= 0.0) || !std::isfinite(laplace)) throw ConfigError("tree: laplace must be >= 0");
}

void ForestParams::validate(Eigen::Index k) const {
    if (n_trees < 1) throw ConfigError("forest: n_trees must be >= 1");
    tree.validate(k);
}

void LogisticParams::validate() const {
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("logistic: l2 must be >= 0");
    if (max_iter < 1) throw ConfigError("logistic: max_iter must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("logistic: tol must be > 0");
}

std::string learner_name(const LearnerSpec& spec) {
    return std::visit(overloaded{[](const TreeParams&) { return std::string("tree"); },
                                 [](const ForestParams&) { return std::string("forest"); },
                                 [](const LogisticParams&) { return std::string("logistic"); }},
                      spec);
}

int TreeModel::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> depth(nodes.size(), 0);
    int deepest = 0;
    // Children always follow their parent in preorder.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) continue;
        depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
        deepest = std::max(deepest, depth[i] + 1);
    }
    return deepest;
}

Eigen::Index model_dim(const ProbModel& model) {
    return std::visit(overloaded{[](const TreeModel& m) { return m.k; },
                                 [](const ForestModel& m) { return m.k; },
                                 [](const LogisticModel& m) { return m.coef.size(); }},
                      model);
}

TrainingSet make_training_set(std::span<const LabeledExample> examples) {
    TrainingSet data;
    if (examples.empty()) throw DataError("no examples");
    const auto n = static_cast<Eigen::Index>(examples.size());
    const auto k = examples.front().x.size();
    data.X.resize(n, k);
    data.y.resize(n);
    data.w.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = examples[static_cast<std::size_t>(i)];
        if (e.x.size() != k) throw DataError("examples have inconsistent feature dimension");
        if (!e.x.allFinite()) throw DataError("non-finite feature in example id " + std::to_string(e.id));
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw DataError("example id " + std::to_string(e.id) + " has non-positive weight");
        if (e.label != 0 && e.label != 1) throw DataError("labels must be 0 or 1");
        data.X.row(i) = e.x.transpose();
        data.y[i] = e.label;
        data.w[i] = e.weight;
    }
    return data;
}

TreeModel fit_tree(std::span<const LabeledExample> examples, const TreeParams& params, std::uint64_t seed) {
    require_examples(examples);
    const auto data = make_training_set(examples);
    params.validate(data.X.cols());
    std::mt19937_64 rng(seed);
    return TreeGrower(data, data.w, presort(data.X), params, rng).grow();
}

ForestModel fit_forest(std::span<const LabeledExample> examples, const ForestParams& params,
                       std::uint64_t seed) {
    require_examples(examples);
    const auto data = make_training_set(examples);
    params.validate(data.X.cols());
    const auto order = presort(data.X);
    const auto n = data.X.rows();

    ForestModel forest;
    forest.k = data.X.cols();
    forest.trees.resize(static_cast<std::size_t>(params.n_trees));
    parallel_for(forest.trees.size(), [&](std::size_t t) {
        std::mt19937_64 rng(seed + t);
        Eigen::VectorXd w = data.w;
        if (params.bootstrap) {
            Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
            std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
            for (Eigen::Index i = 0; i < n; ++i) counts[pick(rng)] += 1.0;
            w = w.cwiseProduct(counts);
        }
        forest.trees[t] = TreeGrower(data, w, order, params.tree, rng).grow();
    });
    return forest;
}

LossAndGradient logistic_objective(const TrainingSet& data, double l2,
                                   const Eigen::Ref<const Eigen::VectorXd>& theta) {
    const auto k = data.X.cols();
    if (theta.size() != k + 1) throw DataError("theta must have k + 1 entries");
    const double total = data.w.sum();
    const Eigen::VectorXd coef = theta.tail(k);
    const Eigen::VectorXd z = (data.X * coef).array() + theta[0];

    LossAndGradient out;
    double nll = 0.0;
    Eigen::VectorXd resid(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        nll += data.w[i] * (softplus(z[i]) - data.y[i] * z[i]);
        resid[i] = data.w[i] * (sigmoid(z[i]) - data.y[i]);
    }
    out.loss = nll / total + 0.5 * l2 * coef.squaredNorm();
    out.grad.resize(k + 1);
    out.grad[0] = resid.sum() / total;
    out.grad.tail(k) = data.X.transpose() * resid / total + l2 * coef;
    return out;
}

LogisticModel fit_logistic(std::span<const LabeledExample> examples, const LogisticParams& params,
                           std::uint64_t /*seed*/) {
    require_examples(examples);
    params.validate();
    const auto data = make_training_set(examples);
    const auto k = data.X.cols();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(k + 1);
    auto current = logistic_objective(data, params.l2, theta);
    Eigen::VectorXd prev_theta, prev_grad;
    int iter = 0;
    for (; iter < params.max_iter; ++iter) {
        if (current.grad.lpNorm<Eigen::Infinity>() < params.tol) break;

        // Barzilai-Borwein trial step, then Armijo backtracking.
        double step = 1.0;
        if (iter > 0) {
            const Eigen::VectorXd s = theta - prev_theta;
            const Eigen::VectorXd g = current.grad - prev_grad;
            const double sg = s.dot(g);
            if (sg > 0.0) step = std::clamp(s.squaredNorm() / sg, 1e-10, 1e10);
        }
        const double g2 = current.grad.squaredNorm();
        Eigen::VectorXd candidate;
        LossAndGradient next;
        for (int halvings = 0;; ++halvings) {
            candidate = theta - step * current.grad;
            next = logistic_objective(data, params.l2, candidate);
            if (std::isfinite(next.loss) && next.loss <= current.loss - 1e-4 * step * g2) break;
            if (halvings > 60) {
                next = current;
                candidate = theta;
                break;
            }
            step *= 0.5;
        }
        if (candidate == theta) break;
        prev_theta = theta;
        prev_grad = current.grad;
        theta = candidate;
        current = std::move(next);
    }

    LogisticModel model;
    model.intercept = theta[0];
    model.coef = theta.tail(k);
    model.iterations = iter;
    model.grad_max_norm = current.grad.lpNorm<Eigen::Infinity>();
    return model;
}

ProbModel fit_model(std::span<const LabeledExample> examples, const LearnerSpec& spec, std::uint64_t seed) {
    return std::visit(overloaded{[&](const TreeParams& p) -> ProbModel { return fit_tree(examples, p, seed); },
                                 [&](const ForestParams& p) -> ProbModel { return fit_forest(examples, p, seed); },
                                 [&](const LogisticParams& p) -> ProbModel {
                                     return fit_logistic(examples, p, seed);
                                 }},
                      spec);
}

double predict_proba(const TreeModel& tree, const Eigen::Ref<const Eigen::VectorXd>& x) {
    std::size_t i = 0;
    while (!tree.nodes[i].is_leaf()) {
        const auto& node = tree.nodes[i];
        i = static_cast<std::size_t>(x[node.feature] <= node.threshold ? node.left : node.right);
    }
    return tree.nodes[i].prob;
}

double predict_proba(const ProbModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const auto k = model_dim(model);
    if (x.size() != k)
        throw DataError("dimension mismatch: model expects " + std::to_string(k) + " features, got " +
                        std::to_string(x.size()));
    return std::visit(overloaded{[&](const TreeModel& m) { return predict_proba(m, x); },
                                 [&](const ForestModel& m) {
                                     double sum = 0.0;
                                     for (const auto& tree : m.trees) sum += predict_proba(tree, x);
                                     return sum / static_cast<double>(m.trees.size());
                                 },
                                 [&](const LogisticModel& m) { return sigmoid(m.coef.dot(x) + m.intercept); }},
                      model);
}

ProbMap predict_all(const ProbModel& model, const Dataset& ds) {
    std::vector<double> p(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) { p[i] = predict_proba(model, ds.instances[i].x); });
    ProbMap out;
    for (std::size_t i = 0; i < ds.size(); ++i) out.emplace(ds.instances[i].id, p[i]);
    return out;
}

std::vector<LabeledExample> target_examples(const Dataset& ds, Target target) {
    if (target == Target::outcome) return observed_subset(ds);
    std::vector<LabeledExample> out;
    out.reserve(ds.size());
    for (const auto& inst : ds.instances) out.push_back({inst.id, inst.x, inst.decision, 1.0, Provenance::observed});
    return out;
}

ProbMap cross_fit_probs(const Dataset& ds, Target target, const LearnerSpec& spec, int folds,
                        std::uint64_t seed) {
    if (folds < 2) throw ConfigError("cross-fitting needs at least 2 folds");
    const auto examples = target_examples(ds, target);
    const auto n = examples.size();
    if (n < static_cast<std::size_t>(folds))
        throw DataError("cross-fitting: " + std::to_string(n) + " usable instances but " +
                        std::to_string(folds) + " folds");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    std::vector<int> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));

    std::vector<double> probs(n);
    for (int f = 0; f < folds; ++f) {
        std::vector<LabeledExample> train;
        train.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (fold_of[i] != f) train.push_back(examples[i]);
        const auto model = fit_model(train, spec, derive_seed(seed, static_cast<std::uint64_t>(f) + 1));
        for (std::size_t i = 0; i < n; ++i)
            if (fold_of[i] == f) probs[i] = predict_proba(model, examples[i].x);
    }

    ProbMap out;
    for (std::size_t i = 0; i < n; ++i) out.emplace(examples[i].id, probs[i]);
    return out;
}

ProbMap in_sample_probs(const Dataset& ds, Target target, const LearnerSpec& spec, std::uint64_t seed) {
    const auto examples = target_examples(ds, target);
    const auto model = fit_model(examples, spec, seed);
    ProbMap out;
    for (const auto& e : examples) out.emplace(e.id, predict_proba(model, e.x));
    return out;
}

}  // namespace selab
