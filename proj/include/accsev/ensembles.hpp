#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "accsev/cart.hpp"
#include "accsev/data.hpp"
#include "accsev/linear.hpp"

namespace accsev {

// ---------------------------------------------------------------------------
// Forests

enum class ForestVariant { bootstrap_rf, full_sample_extra };

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_features = 0;  // 0: floor(sqrt(feature count))
    TreeParams tree;
    std::uint64_t seed = 0;
    bool bootstrap = true;  // random forest only
    unsigned threads = 1;

    bool operator==(const ForestConfig&) const = default;
};

/// Resolves a configured max_features against the feature count.
std::size_t resolve_max_features(std::size_t configured, std::size_t n_features);

struct Forest {
    ForestVariant variant = ForestVariant::bootstrap_rf;
    ForestConfig config;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<DecisionTree> trees;
    /// oob_masks[t][r] is true when training row r is absent from tree t's
    /// sample. Extra trees see every row, so their masks are all false.
    /// Masks are not persisted in model files.
    std::vector<std::vector<bool>> oob_masks;
};

/// Bootstrap sample per tree, best cut over a fresh random feature subset at
/// every node. Tree t is seeded with derive_seed(seed, t).
Forest fit_random_forest(const FeatureMatrix& m, const ForestConfig& config);

/// Every tree sees all rows; each candidate feature gets one uniform random
/// cut point and the best of those is taken.
Forest fit_extra_trees(const FeatureMatrix& m, const ForestConfig& config);

/// Argmax class of every tree for x.
std::vector<int> tree_votes(const Forest& f, std::span<const double> x);

/// Mode of the tree votes, ties to the lower class index.
int predict_majority(const Forest& f, std::span<const double> x);

/// Mode of class votes with ties to the lower index.
int majority_vote(std::span<const int> votes, std::size_t n_classes);

// ---------------------------------------------------------------------------
// AdaBoost (SAMME with depth-1 stumps)

struct AdaBoostConfig {
    std::size_t rounds = 50;
    std::uint64_t seed = 0;

    bool operator==(const AdaBoostConfig&) const = default;
};

struct AdaBoostStage {
    DecisionTree stump;
    double alpha = 0;
    double error = 0;  // weighted training error of the stump
};

struct AdaBoostModel {
    AdaBoostConfig config;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<AdaBoostStage> stages;
    int fallback_class = 0;  // used when no stage was accepted
};

/// Errors at or below this are treated as this value when weighting a stage.
inline constexpr double kAdaBoostMinError = 1e-10;

/// ln((1 - error) / error) + ln(K - 1).
double samme_stage_weight(double error, std::size_t n_classes);

/// Called after every round with the renormalized row weights.
using AdaBoostObserver = std::function<void(std::size_t round, std::span<const double> weights)>;

/// Uniform initial weights; per round a weighted-Gini stump is fit and its
/// weighted error e computed. A stump with e >= 1 - 1/K is rejected and
/// training stops. Otherwise the stage is kept with alpha from
/// samme_stage_weight, misclassified rows are scaled by exp(alpha) and the
/// weights renormalized; e == 0 keeps the stage and stops.
AdaBoostModel fit_adaboost(const FeatureMatrix& m, const AdaBoostConfig& config,
                           const AdaBoostObserver& observer = {});

int predict_adaboost(const AdaBoostModel& model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Gradient boosting (multiclass softmax, one regression tree per class per round)

struct GbmConfig {
    std::size_t rounds = 100;
    double shrinkage = 0.1;
    TreeParams tree{3, 2, 1, Criterion::gini};
    std::uint64_t seed = 0;
    unsigned threads = 1;

    bool operator==(const GbmConfig&) const = default;
};

struct GbmModel {
    GbmConfig config;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<double> initial_scores;            // per-class log prior
    std::vector<std::vector<DecisionTree>> rounds; // rounds x classes; leaves hold unscaled steps
    std::vector<double> training_loss;             // mean softmax loss after 0..rounds rounds

    std::vector<double> decision_scores(std::span<const double> x) const;
    std::vector<double> probabilities(std::span<const double> x) const;
    /// Copy keeping only the first `n` rounds.
    GbmModel truncated(std::size_t n) const;
};

/// Class priors are floored here before taking logs.
inline constexpr double kGbmPriorFloor = 1e-12;

GbmModel fit_gbm(const FeatureMatrix& m, const GbmConfig& config);
int predict_gbm(const GbmModel& model, std::span<const double> x);

/// Mean negative log softmax probability of the true class.
double softmax_loss(const GbmModel& model, const FeatureMatrix& m);

// ---------------------------------------------------------------------------
// Voting pair (log-loss and hinge-loss linear members)

struct VotingConfig {
    SgdConfig lr{0.01, 20, 32, 0, 1e-4};
    SgdConfig sgd{0.01, 20, 32, 1, 1e-4};
    unsigned threads = 1;

    bool operator==(const VotingConfig&) const = default;
};

struct VotingPair {
    LinearModel lr;   // log loss
    LinearModel sgd;  // hinge loss
    SgdConfig lr_config;
    SgdConfig sgd_config;
};

VotingPair fit_voting(const FeatureMatrix& m, const SgdConfig& lr_cfg, const SgdConfig& sgd_cfg,
                      unsigned threads = 1);

/// The common class when the members agree, otherwise the log-loss member's.
int predict_voting(const VotingPair& v, std::span<const double> x);

// ---------------------------------------------------------------------------
// Uniform dispatch

enum class ModelKind { voting, random_forest, adaboost, extra_trees, gbm };

/// The five kinds in report order.
inline constexpr ModelKind kAllModelKinds[] = {ModelKind::voting, ModelKind::random_forest, ModelKind::adaboost,
                                               ModelKind::extra_trees, ModelKind::gbm};

std::string_view model_key(ModelKind kind);           // "voting", "rf", ...
std::string_view model_display_name(ModelKind kind);  // "Random Forest", ...
ModelKind parse_model_kind(std::string_view key);

struct EnsembleModel {
    ModelKind kind = ModelKind::random_forest;
    std::variant<Forest, AdaBoostModel, GbmModel, VotingPair> model;

    std::size_t n_features() const;
    std::size_t n_classes() const;
};

struct ModelConfigs {
    ForestConfig random_forest;
    ForestConfig extra_trees;
    AdaBoostConfig adaboost;
    GbmConfig gbm;
    VotingConfig voting;

    bool operator==(const ModelConfigs&) const = default;
};

EnsembleModel fit_model(ModelKind kind, const FeatureMatrix& m, const ModelConfigs& configs);

int predict(const EnsembleModel& model, std::span<const double> x);
std::vector<int> predict_batch(const EnsembleModel& model, const FeatureMatrix& m, unsigned threads = 1);

}  // namespace accsev
