#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "accsev/data.hpp"

namespace accsev {

enum class Criterion { gini, entropy };
enum class CutRule { best, random };

struct TreeParams {
    int max_depth = 16;  // negative: unlimited
    std::size_t min_samples_split = 2;
    std::size_t min_leaf = 1;
    Criterion criterion = Criterion::gini;

    bool operator==(const TreeParams&) const = default;
};

/// Per-node candidate feature rule: a fresh uniform subset of this size is
/// drawn at every node. Zero (or anything >= the feature count) means all.
struct FeatureSampler {
    std::size_t max_features = 0;
};

/// Candidates whose decreases differ by no more than this are ties.
inline constexpr double kSplitTolerance = 1e-12;

struct SplitCandidate {
    std::size_t feature_index = 0;
    double threshold = 0;
    double impurity_decrease = 0;
    std::size_t left_count = 0;
    std::size_t right_count = 0;
};

/// 1 - sum_k (c_k / total)^2 over (possibly weighted) class counts.
double gini(std::span<const double> label_counts);
/// -sum_k p_k ln p_k over (possibly weighted) class counts.
double entropy(std::span<const double> label_counts);

/// Exhaustive Gini split search over the rows of `m` listed in `rows`.
/// Thresholds sit at midpoints between consecutive distinct values; rows
/// with value <= threshold go left. The largest decrease wins, ties go to
/// the lower feature index and then the lower threshold. Returns nothing
/// when no candidate has a strictly positive decrease with both children
/// holding at least `min_leaf` rows.
std::optional<SplitCandidate> best_split(const FeatureMatrix& m, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> feature_subset,
                                         std::size_t min_leaf);

/// Binary tree stored as a preorder node array. A node's left child is the
/// next node; internal nodes record the index of their right child.
class DecisionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0;
        std::size_t right = 0;
        std::vector<double> value;  // leaf output: class distribution or regression value

        bool is_leaf() const noexcept { return feature < 0; }
        bool operator==(const Node&) const = default;
    };

    DecisionTree() = default;
    DecisionTree(std::size_t n_features, std::size_t n_outputs, TreeParams params, std::vector<Node> nodes);

    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_outputs() const noexcept { return n_outputs_; }
    const TreeParams& params() const noexcept { return params_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t leaf_count() const;
    int depth() const;

    /// Leaf output for x; throws on dimension mismatch.
    std::span<const double> predict(std::span<const double> x) const;
    /// Index of the leaf x routes to, without the dimension check.
    std::size_t leaf_index(std::span<const double> x) const noexcept;
    /// Argmax of the leaf distribution, ties to the lower class index.
    int predict_class(std::span<const double> x) const;

    void write(std::ostream& out) const;
    std::string to_text() const;
    static DecisionTree read(std::istream& in);

    bool operator==(const DecisionTree&) const = default;

private:
    std::size_t n_features_ = 0;
    std::size_t n_outputs_ = 0;
    TreeParams params_;
    std::vector<Node> nodes_;
};

/// Column-major copy of a FeatureMatrix shared by every tree of an ensemble.
class TrainingSet {
public:
    explicit TrainingSet(const FeatureMatrix& m);

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t features() const noexcept { return n_cols_; }
    std::size_t classes() const noexcept { return n_classes_; }
    double at(std::size_t row, std::size_t feature) const noexcept { return columns_[feature * n_rows_ + row]; }
    int label(std::size_t row) const noexcept { return labels_[row]; }

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<double> columns_;
    std::vector<int> labels_;
};

struct GrowOptions {
    TreeParams params;
    FeatureSampler sampler;
    CutRule cut = CutRule::best;
    std::uint64_t seed = 0;
};

/// Classification tree over `rows` (duplicates allowed, e.g. a bootstrap
/// sample). `weights` is indexed by training-set row; empty means unit.
DecisionTree grow_classifier(const TrainingSet& data, std::span<const std::size_t> rows,
                             std::span<const double> weights, const GrowOptions& options);

/// Least-squares regression tree on `targets` (indexed by training-set row).
/// Each leaf's output is `leaf_value(rows reaching the leaf)` when given,
/// otherwise the mean target.
using LeafValueFn = std::function<double(std::span<const std::size_t>)>;
DecisionTree grow_regressor(const TrainingSet& data, std::span<const std::size_t> rows,
                            std::span<const double> targets, const GrowOptions& options,
                            const LeafValueFn& leaf_value = {});

/// Grows a classification tree on every row of `m`.
DecisionTree fit_tree(const FeatureMatrix& m, const TreeParams& params = {},
                      FeatureSampler sampler = {}, CutRule cut = CutRule::best,
                      std::uint64_t seed = 0);

/// Class-probability vector of the leaf x reaches.
std::vector<double> predict_tree(const DecisionTree& t, std::span<const double> x);

/// Argmax with ties to the lower index.
std::size_t argmax(std::span<const double> v) noexcept;

}  // namespace accsev
