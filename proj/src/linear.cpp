#include "accsev/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "accsev/parallel.hpp"
#include "accsev/textio.hpp"

namespace accsev {

double sigmoid(double z) noexcept {
    z = std::clamp(z, -kLogitClamp, kLogitClamp);
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void SgdConfig::validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw Error("sgd: learning rate must be positive");
    if (epochs < 1) throw Error("sgd: epochs must be at least 1");
    if (batch_size < 1) throw Error("sgd: batch size must be at least 1");
    if (!(l2 >= 0) || !std::isfinite(l2)) throw Error("sgd: l2 must be non-negative");
}

LinearModel::LinearModel(LossKind loss, std::size_t n_features, std::size_t n_classes)
    : loss_(loss), n_features_(n_features), n_classes_(n_classes) {
    if (n_classes < 2) throw Error("linear model: need at least two classes");
    const std::size_t problems = n_classes == 2 ? 1 : n_classes;
    weights_.assign(problems, std::vector<double>(n_features + 1, 0.0));
}

double LinearModel::score(std::size_t problem, std::span<const double> x) const {
    if (x.size() != n_features_)
        throw MismatchError("linear model: input has " + std::to_string(x.size()) + " features, model expects " +
                            std::to_string(n_features_));
    const auto& w = weights_[problem];
    double s = w[n_features_];
    for (std::size_t j = 0; j < n_features_; ++j) s += w[j] * x[j];
    return s;
}

std::vector<double> LinearModel::raw_scores(std::span<const double> x) const {
    if (n_classes_ == 2) {
        const double s = score(0, x);
        return {-s, s};
    }
    std::vector<double> out(n_classes_);
    for (std::size_t k = 0; k < n_classes_; ++k) out[k] = score(k, x);
    return out;
}

void LinearModel::write(std::ostream& out) const {
    out << "linear v1\n";
    out << "loss " << (loss_ == LossKind::log ? "log" : "hinge") << " features " << n_features_ << " classes "
        << n_classes_ << '\n';
    for (const auto& w : weights_) {
        out << 'W';
        for (double v : w) out << ' ' << textio::format_double(v);
        out << '\n';
    }
}

LinearModel LinearModel::read(std::istream& in) {
    textio::TokenReader tok(in);
    tok.expect("linear");
    const std::string version = tok.word();
    if (version != "v1") throw Error("model file: unsupported linear version '" + version + "'");
    tok.expect("loss");
    const std::string loss = tok.word();
    if (loss != "log" && loss != "hinge") throw Error("model file: unknown loss '" + loss + "'");
    tok.expect("features");
    const std::size_t features = tok.count();
    tok.expect("classes");
    const std::size_t classes = tok.count();
    LinearModel model(loss == "log" ? LossKind::log : LossKind::hinge, features, classes);
    for (auto& w : model.weights_) {
        tok.expect("W");
        for (auto& v : w) v = tok.real();
    }
    return model;
}

std::vector<double> logit_probability(const LinearModel& model, std::span<const double> x) {
    if (model.loss() != LossKind::log) throw Error("logit_probability: model was not trained with log loss");
    if (model.n_classes() == 2) {
        const double p = sigmoid(model.score(0, x));
        return {1.0 - p, p};
    }
    std::vector<double> p(model.n_classes());
    double total = 0;
    for (std::size_t k = 0; k < p.size(); ++k) total += p[k] = sigmoid(model.score(k, x));
    for (auto& v : p) v /= total;
    return p;
}

LossGradient loss_and_gradient(LossKind loss, std::span<const double> weights, const FeatureMatrix& m,
                               std::span<const std::size_t> batch, std::span<const int> targets,
                               double l2) {
    if (batch.empty()) throw Error("loss_and_gradient: empty batch");
    if (targets.size() != batch.size()) throw Error("loss_and_gradient: one target per batch row required");
    const std::size_t d = m.n_cols;
    if (weights.size() != d + 1) throw MismatchError("loss_and_gradient: weight length does not match features");
    LossGradient out;
    out.gradient.assign(d + 1, 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto x = m.row(batch[i]);
        double z = weights[d];
        for (std::size_t j = 0; j < d; ++j) z += weights[j] * x[j];
        const double t = targets[i] ? 1.0 : 0.0;
        double coef = 0;  // d(row loss) / dz
        if (loss == LossKind::log) {
            // softplus(z) - t z
            out.loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - t * z;
            coef = sigmoid(z) - t;
        } else {
            const double y = 2.0 * t - 1.0;
            const double margin = y * z;
            if (margin < 1.0) {
                out.loss += 1.0 - margin;
                coef = -y;
            }
        }
        if (coef != 0) {
            for (std::size_t j = 0; j < d; ++j) out.gradient[j] += coef * x[j] * inv_n;
            out.gradient[d] += coef * inv_n;
        }
    }
    out.loss *= inv_n;
    double norm_sq = 0;
    for (std::size_t j = 0; j < d; ++j) {
        norm_sq += weights[j] * weights[j];
        out.gradient[j] += l2 * weights[j];
    }
    out.loss += 0.5 * l2 * norm_sq;
    return out;
}

LossGradient loss_and_gradient(const LinearModel& model, std::size_t problem, const FeatureMatrix& m,
                               std::span<const std::size_t> batch, std::span<const int> targets,
                               double l2) {
    if (m.n_cols != model.n_features()) throw MismatchError("loss_and_gradient: matrix width does not match model");
    if (problem >= model.n_problems()) throw Error("loss_and_gradient: problem index out of range");
    return loss_and_gradient(model.loss(), model.weights(problem), m, batch, targets, l2);
}

LinearModel sgd_fit(const FeatureMatrix& m, LossKind loss, const SgdConfig& cfg, unsigned threads) {
    cfg.validate();
    if (m.n_rows == 0) throw Error("sgd: empty matrix");
    if (m.n_classes() < 2) throw Error("sgd: need at least two classes");
    LinearModel model(loss, m.n_cols, m.n_classes());

    parallel_for(model.n_problems(), threads, [&](std::size_t problem) {
        const int positive = model.n_classes() == 2 ? 1 : static_cast<int>(problem);
        std::vector<int> all_targets(m.n_rows);
        for (std::size_t r = 0; r < m.n_rows; ++r) all_targets[r] = m.labels[r] == positive;

        std::mt19937_64 rng(derive_seed(cfg.seed, problem));
        std::vector<std::size_t> order(m.n_rows);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<int> batch_targets;
        auto w = model.weights(problem);
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const std::span<const std::size_t> batch(order.data() + start, end - start);
                batch_targets.clear();
                for (std::size_t r : batch) batch_targets.push_back(all_targets[r]);
                const auto lg = loss_and_gradient(loss, w, m, batch, batch_targets, cfg.l2);
                if (!std::isfinite(lg.loss))
                    throw Error("sgd: non-finite loss at epoch " + std::to_string(epoch) + " (class " +
                                std::to_string(positive) + "); lower the learning rate");
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.learning_rate * lg.gradient[j];
            }
            for (double v : w)
                if (!std::isfinite(v))
                    throw Error("sgd: weights diverged at epoch " + std::to_string(epoch) + " (class " +
                                std::to_string(positive) + "); lower the learning rate");
        }
    });
    return model;
}

int predict_linear(const LinearModel& model, std::span<const double> x) {
    const auto scores = model.raw_scores(x);
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k)
        if (scores[k] > scores[best]) best = k;
    return static_cast<int>(best);
}

}  // namespace accsev
