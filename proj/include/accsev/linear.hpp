#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "accsev/data.hpp"

namespace accsev {

enum class LossKind { log, hinge };

/// Exponents fed to the logistic function are clamped to this magnitude.
inline constexpr double kLogitClamp = 500.0;

double sigmoid(double z) noexcept;

struct SgdConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double l2 = 1e-4;

    void validate() const;
    bool operator==(const SgdConfig&) const = default;
};

/// One weight vector per one-vs-rest problem, each of length n_features + 1
/// with the intercept last. Two-class models hold a single vector scoring
/// class 1 against class 0.
class LinearModel {
public:
    LinearModel() = default;
    LinearModel(LossKind loss, std::size_t n_features, std::size_t n_classes);

    LossKind loss() const noexcept { return loss_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    std::size_t n_problems() const noexcept { return weights_.size(); }
    std::span<double> weights(std::size_t problem) noexcept { return weights_[problem]; }
    std::span<const double> weights(std::size_t problem) const noexcept { return weights_[problem]; }

    /// Linear score of one problem: weights . [x, 1].
    double score(std::size_t problem, std::span<const double> x) const;
    /// Per-class raw scores; for two classes (-s, s).
    std::vector<double> raw_scores(std::span<const double> x) const;

    void write(std::ostream& out) const;
    static LinearModel read(std::istream& in);

    bool operator==(const LinearModel&) const = default;

private:
    LossKind loss_ = LossKind::log;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<std::vector<double>> weights_;
};

/// Per-class logistic probabilities normalized to sum to 1. For two classes
/// this is (1 - p, p) with p = sigmoid(score).
std::vector<double> logit_probability(const LinearModel& model, std::span<const double> x);

struct LossGradient {
    double loss = 0;
    std::vector<double> gradient;  // n_features + 1, intercept last
};

/// Mean per-row loss of one binary problem over the batch plus
/// (l2 / 2) * ||w||^2 (intercept excluded), and its exact gradient with
/// respect to that problem's weights. Targets are 0/1.
LossGradient loss_and_gradient(const LinearModel& model, std::size_t problem, const FeatureMatrix& m,
                               std::span<const std::size_t> batch, std::span<const int> targets,
                               double l2);

/// Same quantity for a bare weight vector; used by the trainer and tests.
LossGradient loss_and_gradient(LossKind loss, std::span<const double> weights, const FeatureMatrix& m,
                               std::span<const std::size_t> batch, std::span<const int> targets,
                               double l2);

/// One-vs-rest mini-batch SGD with a constant step. Problem p uses a seed
/// derived from (cfg.seed, p), so problems can train in parallel.
LinearModel sgd_fit(const FeatureMatrix& m, LossKind loss, const SgdConfig& cfg, unsigned threads = 1);

/// Argmax of raw scores, ties to the lower class index.
int predict_linear(const LinearModel& model, std::span<const double> x);

}  // namespace accsev
