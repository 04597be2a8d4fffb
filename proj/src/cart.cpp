#include "accsev/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "accsev/textio.hpp"

namespace accsev {

double gini(std::span<const double> label_counts) {
    double total = 0;
    for (double c : label_counts) {
        if (c < 0) throw Error("gini: negative count");
        total += c;
    }
    if (total <= 0) throw Error("gini: counts sum to zero");
    double sum_sq = 0;
    for (double c : label_counts) sum_sq += (c / total) * (c / total);
    return 1.0 - sum_sq;
}

double entropy(std::span<const double> label_counts) {
    double total = 0;
    for (double c : label_counts) {
        if (c < 0) throw Error("entropy: negative count");
        total += c;
    }
    if (total <= 0) throw Error("entropy: counts sum to zero");
    double h = 0;
    for (double c : label_counts)
        if (c > 0) h -= (c / total) * std::log(c / total);
    return h;
}

std::size_t argmax(std::span<const double> v) noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

namespace {

struct ClassStats {
    std::vector<double> w;
    double total = 0;
    std::size_t n = 0;
};

class ClassPolicy {
public:
    using Stats = ClassStats;

    ClassPolicy(const TrainingSet& data, std::span<const double> weights, Criterion criterion)
        : data_(data), weights_(weights), criterion_(criterion) {}

    Stats empty() const { return {std::vector<double>(data_.classes(), 0.0), 0.0, 0}; }
    void add(Stats& s, std::size_t row) const {
        const double wt = weights_.empty() ? 1.0 : weights_[row];
        s.w[static_cast<std::size_t>(data_.label(row))] += wt;
        s.total += wt;
        ++s.n;
    }
    void difference(Stats& out, const Stats& a, const Stats& b) const {
        for (std::size_t k = 0; k < out.w.size(); ++k) out.w[k] = std::max(0.0, a.w[k] - b.w[k]);
        out.total = 0;
        for (double v : out.w) out.total += v;
        out.n = a.n - b.n;
    }
    double weight(const Stats& s) const { return s.total; }
    double impurity(const Stats& s) const {
        if (s.total <= 0) return 0.0;
        if (criterion_ == Criterion::entropy) return entropy(s.w);
        double sum_sq = 0;
        for (double c : s.w) sum_sq += (c / s.total) * (c / s.total);
        return 1.0 - sum_sq;
    }
    std::vector<double> leaf(const Stats& s, std::span<const std::size_t>) const {
        std::vector<double> p(s.w.size(), 1.0 / static_cast<double>(s.w.size()));
        if (s.total > 0)
            for (std::size_t k = 0; k < p.size(); ++k) p[k] = s.w[k] / s.total;
        return p;
    }
    std::size_t outputs() const { return data_.classes(); }

private:
    const TrainingSet& data_;
    std::span<const double> weights_;
    Criterion criterion_;
};

struct MomentStats {
    double sum = 0;
    double sum_sq = 0;
    std::size_t n = 0;
};

class RegressionPolicy {
public:
    using Stats = MomentStats;

    RegressionPolicy(std::span<const double> targets, const LeafValueFn& leaf_value)
        : targets_(targets), leaf_value_(leaf_value) {}

    Stats empty() const { return {}; }
    void add(Stats& s, std::size_t row) const {
        const double y = targets_[row];
        s.sum += y;
        s.sum_sq += y * y;
        ++s.n;
    }
    void difference(Stats& out, const Stats& a, const Stats& b) const {
        out.sum = a.sum - b.sum;
        out.sum_sq = a.sum_sq - b.sum_sq;
        out.n = a.n - b.n;
    }
    double weight(const Stats& s) const { return static_cast<double>(s.n); }
    double impurity(const Stats& s) const {
        if (s.n == 0) return 0.0;
        const double mean = s.sum / static_cast<double>(s.n);
        return std::max(0.0, s.sum_sq / static_cast<double>(s.n) - mean * mean);
    }
    std::vector<double> leaf(const Stats& s, std::span<const std::size_t> rows) const {
        if (leaf_value_) return {leaf_value_(rows)};
        return {s.n ? s.sum / static_cast<double>(s.n) : 0.0};
    }
    std::size_t outputs() const { return 1; }

private:
    std::span<const double> targets_;
    const LeafValueFn& leaf_value_;
};

template <class Policy>
class Grower {
public:
    using Stats = typename Policy::Stats;

    Grower(const TrainingSet& data, const Policy& policy, const GrowOptions& options)
        : data_(data), policy_(policy), options_(options), rng_(options.seed) {}

    DecisionTree grow(std::span<const std::size_t> rows) {
        if (rows.empty()) throw Error("tree: no training rows");
        std::vector<std::size_t> owned(rows.begin(), rows.end());
        build(owned, 0);
        return DecisionTree(data_.features(), policy_.outputs(), options_.params, std::move(nodes_));
    }

    /// Best candidate over `features` for the node holding `rows`.
    std::optional<SplitCandidate> search(std::span<const std::size_t> rows, const Stats& parent,
                                         std::span<const std::size_t> features) {
        const double parent_weight = policy_.weight(parent);
        if (parent_weight <= 0) return std::nullopt;
        const double parent_impurity = policy_.impurity(parent);
        std::optional<SplitCandidate> best;
        Stats left = policy_.empty();
        Stats right = policy_.empty();
        const std::size_t min_leaf = std::max<std::size_t>(1, options_.params.min_leaf);

        auto consider = [&](std::size_t feature, double threshold) {
            policy_.difference(right, parent, left);
            if (left.n < min_leaf || right.n < min_leaf) return;
            const double decrease = parent_impurity -
                                    policy_.weight(left) / parent_weight * policy_.impurity(left) -
                                    policy_.weight(right) / parent_weight * policy_.impurity(right);
            if (decrease <= kSplitTolerance) return;
            if (best && decrease <= best->impurity_decrease + kSplitTolerance) return;
            best = SplitCandidate{feature, threshold, decrease, left.n, right.n};
        };

        for (std::size_t f : features) {
            if (options_.cut == CutRule::best) {
                sorted_.clear();
                for (std::size_t r : rows) sorted_.emplace_back(data_.at(r, f), r);
                std::sort(sorted_.begin(), sorted_.end());
                if (sorted_.front().first == sorted_.back().first) continue;
                left = policy_.empty();
                for (std::size_t i = 0; i + 1 < sorted_.size(); ++i) {
                    policy_.add(left, sorted_[i].second);
                    const double a = sorted_[i].first;
                    const double b = sorted_[i + 1].first;
                    if (a == b) continue;
                    consider(f, std::midpoint(a, b));
                }
            } else {
                double lo = data_.at(rows.front(), f);
                double hi = lo;
                for (std::size_t r : rows) {
                    lo = std::min(lo, data_.at(r, f));
                    hi = std::max(hi, data_.at(r, f));
                }
                if (!(lo < hi)) continue;
                const double threshold = std::uniform_real_distribution<double>(lo, hi)(rng_);
                left = policy_.empty();
                for (std::size_t r : rows)
                    if (data_.at(r, f) <= threshold) policy_.add(left, r);
                consider(f, threshold);
            }
        }
        return best;
    }

private:
    std::vector<std::size_t> candidate_features() {
        const std::size_t total = data_.features();
        const std::size_t m = options_.sampler.max_features;
        std::vector<std::size_t> features(total);
        std::iota(features.begin(), features.end(), std::size_t{0});
        if (m == 0 || m >= total) return features;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = std::uniform_int_distribution<std::size_t>(i, total - 1)(rng_);
            std::swap(features[i], features[j]);
        }
        features.resize(m);
        std::sort(features.begin(), features.end());
        return features;
    }

    void build(std::vector<std::size_t>& rows, int depth) {
        Stats stats = policy_.empty();
        for (std::size_t r : rows) policy_.add(stats, r);
        const std::size_t index = nodes_.size();
        nodes_.push_back(DecisionTree::Node{});

        const auto& p = options_.params;
        std::optional<SplitCandidate> split;
        const bool can_split = (p.max_depth < 0 || depth < p.max_depth) &&
                               rows.size() >= std::max<std::size_t>(2, p.min_samples_split) &&
                               policy_.impurity(stats) > 0;
        if (can_split) {
            const auto features = candidate_features();
            split = search(rows, stats, features);
        }
        if (!split) {
            nodes_[index].value = policy_.leaf(stats, rows);
            return;
        }

        std::vector<std::size_t> left, right;
        left.reserve(split->left_count);
        right.reserve(split->right_count);
        for (std::size_t r : rows)
            (data_.at(r, split->feature_index) <= split->threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        nodes_[index].feature = static_cast<int>(split->feature_index);
        nodes_[index].threshold = split->threshold;
        build(left, depth + 1);
        nodes_[index].right = nodes_.size();
        build(right, depth + 1);
    }

    const TrainingSet& data_;
    const Policy& policy_;
    const GrowOptions& options_;
    std::mt19937_64 rng_;
    std::vector<DecisionTree::Node> nodes_;
    std::vector<std::pair<double, std::size_t>> sorted_;
};

}  // namespace

std::optional<SplitCandidate> best_split(const FeatureMatrix& m, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> feature_subset,
                                         std::size_t min_leaf) {
    if (rows.empty()) throw Error("best_split: no rows");
    if (feature_subset.empty()) throw Error("best_split: empty feature subset");
    for (std::size_t f : feature_subset)
        if (f >= m.n_cols) throw Error("best_split: feature index out of range");
    std::vector<std::size_t> features(feature_subset.begin(), feature_subset.end());
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    const TrainingSet data(m);
    const ClassPolicy policy(data, {}, Criterion::gini);
    GrowOptions options;
    options.params.min_leaf = min_leaf;
    Grower<ClassPolicy> grower(data, policy, options);
    ClassStats parent = policy.empty();
    for (std::size_t r : rows) policy.add(parent, r);
    return grower.search(rows, parent, features);
}

DecisionTree::DecisionTree(std::size_t n_features, std::size_t n_outputs, TreeParams params,
                           std::vector<Node> nodes)
    : n_features_(n_features), n_outputs_(n_outputs), params_(params), nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw Error("tree: no nodes");
}

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(),
                                                  [](const Node& n) { return n.is_leaf(); }));
}

int DecisionTree::depth() const {
    if (nodes_.empty()) return 0;
    int deepest = 0;
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes_[i].is_leaf()) {
            stack.emplace_back(i + 1, d + 1);
            stack.emplace_back(nodes_[i].right, d + 1);
        }
    }
    return deepest;
}

std::size_t DecisionTree::leaf_index(std::span<const double> x) const noexcept {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf())
        i = x[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? i + 1 : nodes_[i].right;
    return i;
}

std::span<const double> DecisionTree::predict(std::span<const double> x) const {
    if (x.size() != n_features_)
        throw MismatchError("tree: input has " + std::to_string(x.size()) + " features, tree expects " +
                            std::to_string(n_features_));
    return nodes_[leaf_index(x)].value;
}

int DecisionTree::predict_class(std::span<const double> x) const {
    return static_cast<int>(argmax(predict(x)));
}

void DecisionTree::write(std::ostream& out) const {
    out << "tree v1\n";
    out << "features " << n_features_ << " outputs " << n_outputs_ << " nodes " << nodes_.size() << '\n';
    out << "params " << params_.max_depth << ' ' << params_.min_samples_split << ' ' << params_.min_leaf
        << ' ' << (params_.criterion == Criterion::gini ? "gini" : "entropy") << '\n';
    for (const auto& n : nodes_) {
        if (n.is_leaf()) {
            out << 'L';
            for (double v : n.value) out << ' ' << textio::format_double(v);
        } else {
            out << "S " << n.feature << ' ' << textio::format_double(n.threshold);
        }
        out << '\n';
    }
}

std::string DecisionTree::to_text() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

DecisionTree DecisionTree::read(std::istream& in) {
    textio::TokenReader tok(in);
    tok.expect("tree");
    const std::string version = tok.word();
    if (version != "v1") throw Error("model file: unsupported tree version '" + version + "'");
    tok.expect("features");
    const std::size_t n_features = tok.count();
    tok.expect("outputs");
    const std::size_t n_outputs = tok.count();
    tok.expect("nodes");
    const std::size_t n_nodes = tok.count();
    tok.expect("params");
    TreeParams params;
    params.max_depth = static_cast<int>(tok.integer());
    params.min_samples_split = tok.count();
    params.min_leaf = tok.count();
    const std::string crit = tok.word();
    if (crit == "gini") params.criterion = Criterion::gini;
    else if (crit == "entropy") params.criterion = Criterion::entropy;
    else throw Error("model file: unknown criterion '" + crit + "'");

    std::vector<Node> nodes(n_nodes);
    for (auto& n : nodes) {
        const std::string kind = tok.word();
        if (kind == "L") {
            n.value.resize(n_outputs);
            for (auto& v : n.value) v = tok.real();
        } else if (kind == "S") {
            n.feature = static_cast<int>(tok.integer());
            n.threshold = tok.real();
            if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features)
                throw Error("model file: split feature out of range");
        } else {
            throw Error("model file: expected node 'L' or 'S', found '" + kind + "'");
        }
    }
    // recover right-child links from the preorder layout
    std::vector<std::size_t> pending;  // internal nodes awaiting their right child
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (i > 0 && nodes[i - 1].is_leaf()) {
            if (pending.empty()) throw Error("model file: malformed tree node order");
            nodes[pending.back()].right = i;
            pending.pop_back();
        }
        if (!nodes[i].is_leaf()) pending.push_back(i);
    }
    if (!pending.empty() || !nodes.back().is_leaf()) throw Error("model file: truncated tree");
    return DecisionTree(n_features, n_outputs, params, std::move(nodes));
}

TrainingSet::TrainingSet(const FeatureMatrix& m)
    : n_rows_(m.n_rows), n_cols_(m.n_cols), n_classes_(m.n_classes()), columns_(m.n_rows * m.n_cols),
      labels_(m.labels) {
    for (std::size_t r = 0; r < n_rows_; ++r)
        for (std::size_t c = 0; c < n_cols_; ++c) columns_[c * n_rows_ + r] = m.values[r * n_cols_ + c];
    for (int l : labels_)
        if (l < 0 || static_cast<std::size_t>(l) >= std::max<std::size_t>(n_classes_, 1))
            throw Error("training set: label out of class range");
}

DecisionTree grow_classifier(const TrainingSet& data, std::span<const std::size_t> rows,
                             std::span<const double> weights, const GrowOptions& options) {
    const ClassPolicy policy(data, weights, options.params.criterion);
    return Grower<ClassPolicy>(data, policy, options).grow(rows);
}

DecisionTree grow_regressor(const TrainingSet& data, std::span<const std::size_t> rows,
                            std::span<const double> targets, const GrowOptions& options,
                            const LeafValueFn& leaf_value) {
    const RegressionPolicy policy(targets, leaf_value);
    return Grower<RegressionPolicy>(data, policy, options).grow(rows);
}

DecisionTree fit_tree(const FeatureMatrix& m, const TreeParams& params, FeatureSampler sampler,
                      CutRule cut, std::uint64_t seed) {
    if (m.n_rows == 0) throw Error("fit_tree: empty matrix");
    const TrainingSet data(m);
    std::vector<std::size_t> rows(m.n_rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return grow_classifier(data, rows, {}, GrowOptions{params, sampler, cut, seed});
}

std::vector<double> predict_tree(const DecisionTree& t, std::span<const double> x) {
    auto p = t.predict(x);
    return {p.begin(), p.end()};
}

}  // namespace accsev
