#include "accsev/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "accsev/parallel.hpp"

namespace accsev {

namespace {

void check_dimension(std::size_t got, std::size_t expected, std::string_view what) {
    if (got != expected)
        throw MismatchError(std::string(what) + ": input has " + std::to_string(got) + " features, model expects " +
                            std::to_string(expected));
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

Forest fit_forest(const FeatureMatrix& m, const ForestConfig& config, ForestVariant variant) {
    if (config.n_trees < 1) throw Error("forest: n_trees must be at least 1");
    if (m.n_rows == 0) throw Error("forest: empty matrix");
    if (m.n_classes() < 2) throw Error("forest: need at least two classes");
    const std::size_t max_features = resolve_max_features(config.max_features, m.n_cols);

    Forest f;
    f.variant = variant;
    f.config = config;
    f.n_features = m.n_cols;
    f.n_classes = m.n_classes();
    f.trees.resize(config.n_trees);
    f.oob_masks.assign(config.n_trees, std::vector<bool>(m.n_rows, false));

    const TrainingSet data(m);
    const bool bootstrap = variant == ForestVariant::bootstrap_rf && config.bootstrap;
    const CutRule cut = variant == ForestVariant::bootstrap_rf ? CutRule::best : CutRule::random;
    parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
        std::vector<std::size_t> rows;
        if (bootstrap) {
            std::mt19937_64 rng(derive_seed(config.seed, t, 0));
            std::uniform_int_distribution<std::size_t> pick(0, m.n_rows - 1);
            std::vector<bool> drawn(m.n_rows, false);
            rows.resize(m.n_rows);
            for (auto& r : rows) {
                r = pick(rng);
                drawn[r] = true;
            }
            std::sort(rows.begin(), rows.end());
            for (std::size_t r = 0; r < m.n_rows; ++r) f.oob_masks[t][r] = !drawn[r];
        } else {
            rows = all_rows(m.n_rows);
        }
        const GrowOptions options{config.tree, FeatureSampler{max_features}, cut, derive_seed(config.seed, t, 1)};
        f.trees[t] = grow_classifier(data, rows, {}, options);
    });
    return f;
}

}  // namespace

std::size_t resolve_max_features(std::size_t configured, std::size_t n_features) {
    if (n_features == 0) throw Error("forest: matrix has no features");
    if (configured > n_features)
        throw Error("forest: max_features " + std::to_string(configured) + " exceeds feature count " +
                    std::to_string(n_features));
    if (configured > 0) return configured;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
}

Forest fit_random_forest(const FeatureMatrix& m, const ForestConfig& config) {
    return fit_forest(m, config, ForestVariant::bootstrap_rf);
}

Forest fit_extra_trees(const FeatureMatrix& m, const ForestConfig& config) {
    return fit_forest(m, config, ForestVariant::full_sample_extra);
}

std::vector<int> tree_votes(const Forest& f, std::span<const double> x) {
    check_dimension(x.size(), f.n_features, "forest");
    std::vector<int> votes;
    votes.reserve(f.trees.size());
    for (const auto& t : f.trees) votes.push_back(static_cast<int>(argmax(t.predict(x))));
    return votes;
}

int majority_vote(std::span<const int> votes, std::size_t n_classes) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (int v : votes) ++counts.at(static_cast<std::size_t>(v));
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
        if (counts[k] > counts[best]) best = k;
    return static_cast<int>(best);
}

int predict_majority(const Forest& f, std::span<const double> x) {
    const auto votes = tree_votes(f, x);
    return majority_vote(votes, f.n_classes);
}

double samme_stage_weight(double error, std::size_t n_classes) {
    if (n_classes < 2) throw Error("adaboost: need at least two classes");
    const double e = std::clamp(error, kAdaBoostMinError, 1.0 - kAdaBoostMinError);
    return std::log((1.0 - e) / e) + std::log(static_cast<double>(n_classes) - 1.0);
}

AdaBoostModel fit_adaboost(const FeatureMatrix& m, const AdaBoostConfig& config, const AdaBoostObserver& observer) {
    if (config.rounds < 1) throw Error("adaboost: rounds must be at least 1");
    if (m.n_rows == 0) throw Error("adaboost: empty matrix");
    const std::size_t K = m.n_classes();
    if (K < 2) throw Error("adaboost: need at least two classes");

    AdaBoostModel model;
    model.config = config;
    model.n_features = m.n_cols;
    model.n_classes = K;
    std::vector<std::size_t> counts(K, 0);
    for (int l : m.labels) ++counts[static_cast<std::size_t>(l)];
    model.fallback_class = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());

    const TrainingSet data(m);
    const auto rows = all_rows(m.n_rows);
    std::vector<double> weights(m.n_rows, 1.0 / static_cast<double>(m.n_rows));
    std::vector<char> missed(m.n_rows);
    const double reject_at = 1.0 - 1.0 / static_cast<double>(K);

    for (std::size_t round = 0; round < config.rounds; ++round) {
        const GrowOptions options{TreeParams{1, 2, 1, Criterion::gini}, {}, CutRule::best,
                                  derive_seed(config.seed, round)};
        DecisionTree stump = grow_classifier(data, rows, weights, options);
        double total = 0, wrong = 0;
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            missed[r] = stump.predict_class(m.row(r)) != m.labels[r];
            total += weights[r];
            if (missed[r]) wrong += weights[r];
        }
        const double error = wrong / total;
        if (error >= reject_at) break;
        const double alpha = samme_stage_weight(error, K);
        model.stages.push_back(AdaBoostStage{std::move(stump), alpha, error});
        if (error <= 0) break;

        const double boost = std::exp(alpha);
        double sum = 0;
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            if (missed[r]) weights[r] *= boost;
            sum += weights[r];
        }
        for (auto& w : weights) w /= sum;
        if (observer) observer(round, weights);
    }
    return model;
}

int predict_adaboost(const AdaBoostModel& model, std::span<const double> x) {
    check_dimension(x.size(), model.n_features, "adaboost");
    if (model.stages.empty()) return model.fallback_class;
    std::vector<double> votes(model.n_classes, 0.0);
    for (const auto& s : model.stages) votes[argmax(s.stump.predict(x))] += s.alpha;
    return static_cast<int>(argmax(votes));
}

std::vector<double> GbmModel::decision_scores(std::span<const double> x) const {
    check_dimension(x.size(), n_features, "gbm");
    std::vector<double> f = initial_scores;
    for (const auto& round : rounds)
        for (std::size_t k = 0; k < round.size(); ++k) f[k] += config.shrinkage * round[k].predict(x)[0];
    return f;
}

std::vector<double> GbmModel::probabilities(std::span<const double> x) const {
    auto f = decision_scores(x);
    const double top = *std::max_element(f.begin(), f.end());
    double total = 0;
    for (auto& v : f) total += v = std::exp(v - top);
    for (auto& v : f) v /= total;
    return f;
}

GbmModel GbmModel::truncated(std::size_t n) const {
    GbmModel out = *this;
    if (n < out.rounds.size()) out.rounds.resize(n);
    if (n + 1 < out.training_loss.size()) out.training_loss.resize(n + 1);
    return out;
}

namespace {

double row_softmax_loss(std::span<const double> scores, int label) {
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0;
    for (double v : scores) total += std::exp(v - top);
    return std::log(total) + top - scores[static_cast<std::size_t>(label)];
}

}  // namespace

double softmax_loss(const GbmModel& model, const FeatureMatrix& m) {
    if (m.n_rows == 0) throw Error("softmax_loss: empty matrix");
    double total = 0;
    for (std::size_t r = 0; r < m.n_rows; ++r) total += row_softmax_loss(model.decision_scores(m.row(r)), m.labels[r]);
    return total / static_cast<double>(m.n_rows);
}

GbmModel fit_gbm(const FeatureMatrix& m, const GbmConfig& config) {
    if (config.rounds < 1) throw Error("gbm: rounds must be at least 1");
    if (!(config.shrinkage > 0 && config.shrinkage <= 1)) throw Error("gbm: shrinkage must lie in (0, 1]");
    if (m.n_rows == 0) throw Error("gbm: empty matrix");
    const std::size_t K = m.n_classes();
    if (K < 2) throw Error("gbm: need at least two classes");
    const std::size_t n = m.n_rows;

    GbmModel model;
    model.config = config;
    model.n_features = m.n_cols;
    model.n_classes = K;
    std::vector<double> counts(K, 0.0);
    for (int l : m.labels) counts[static_cast<std::size_t>(l)] += 1.0;
    for (double c : counts)
        model.initial_scores.push_back(std::log(std::max(c / static_cast<double>(n), kGbmPriorFloor)));

    const TrainingSet data(m);
    const auto rows = all_rows(n);
    std::vector<double> scores(n * K);
    for (std::size_t r = 0; r < n; ++r)
        std::copy(model.initial_scores.begin(), model.initial_scores.end(), scores.begin() + static_cast<std::ptrdiff_t>(r * K));
    auto mean_loss = [&] {
        double total = 0;
        for (std::size_t r = 0; r < n; ++r)
            total += row_softmax_loss(std::span<const double>(scores.data() + r * K, K), m.labels[r]);
        return total / static_cast<double>(n);
    };
    model.training_loss.push_back(mean_loss());

    const double leaf_scale = static_cast<double>(K - 1) / static_cast<double>(K);
    std::vector<std::vector<double>> residuals(K, std::vector<double>(n));
    for (std::size_t round = 0; round < config.rounds; ++round) {
        for (std::size_t r = 0; r < n; ++r) {
            const double* f = scores.data() + r * K;
            const double top = *std::max_element(f, f + K);
            double total = 0;
            for (std::size_t k = 0; k < K; ++k) total += std::exp(f[k] - top);
            for (std::size_t k = 0; k < K; ++k) {
                const double p = std::exp(f[k] - top) / total;
                residuals[k][r] = (m.labels[r] == static_cast<int>(k) ? 1.0 : 0.0) - p;
            }
        }
        std::vector<DecisionTree> trees(K);
        parallel_for(K, config.threads, [&](std::size_t k) {
            const auto& res = residuals[k];
            // one Newton step for the softmax loss within the leaf
            const LeafValueFn leaf = [&res, leaf_scale](std::span<const std::size_t> leaf_rows) {
                double num = 0, den = 0;
                for (std::size_t r : leaf_rows) {
                    num += res[r];
                    den += std::abs(res[r]) * (1.0 - std::abs(res[r]));
                }
                return den < 1e-150 ? 0.0 : leaf_scale * num / den;
            };
            const GrowOptions options{config.tree, {}, CutRule::best, derive_seed(config.seed, round, k)};
            trees[k] = grow_regressor(data, rows, res, options, leaf);
        });
        for (std::size_t r = 0; r < n; ++r) {
            const auto x = m.row(r);
            for (std::size_t k = 0; k < K; ++k) {
                double& f = scores[r * K + k];
                f += config.shrinkage * trees[k].nodes()[trees[k].leaf_index(x)].value[0];
                if (!std::isfinite(f))
                    throw Error("gbm: non-finite score at round " + std::to_string(round + 1) + " (class " +
                                std::to_string(k) + ")");
            }
        }
        model.rounds.push_back(std::move(trees));
        model.training_loss.push_back(mean_loss());
    }
    return model;
}

int predict_gbm(const GbmModel& model, std::span<const double> x) {
    return static_cast<int>(argmax(model.decision_scores(x)));
}

VotingPair fit_voting(const FeatureMatrix& m, const SgdConfig& lr_cfg, const SgdConfig& sgd_cfg, unsigned threads) {
    lr_cfg.validate();
    sgd_cfg.validate();
    VotingPair v;
    v.lr_config = lr_cfg;
    v.sgd_config = sgd_cfg;
    parallel_for(2, threads, [&](std::size_t member) {
        if (member == 0) v.lr = sgd_fit(m, LossKind::log, lr_cfg);
        else v.sgd = sgd_fit(m, LossKind::hinge, sgd_cfg);
    });
    return v;
}

int predict_voting(const VotingPair& v, std::span<const double> x) {
    const int lr = predict_linear(v.lr, x);
    const int sgd = predict_linear(v.sgd, x);
    if (lr == sgd) return lr;
    // a two-member disagreement is a 1-1 tie, resolved for the log-loss member
    return lr;
}

std::string_view model_key(ModelKind kind) {
    switch (kind) {
        case ModelKind::voting: return "voting";
        case ModelKind::random_forest: return "rf";
        case ModelKind::adaboost: return "adaboost";
        case ModelKind::extra_trees: return "extratrees";
        case ModelKind::gbm: return "gbm";
    }
    return "rf";
}

std::string_view model_display_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::voting: return "Voting Classifier";
        case ModelKind::random_forest: return "Random Forest";
        case ModelKind::adaboost: return "AdaBoost Classifier";
        case ModelKind::extra_trees: return "Extra Tree Classifier";
        case ModelKind::gbm: return "Gradient Boosting Machine";
    }
    return "Random Forest";
}

ModelKind parse_model_kind(std::string_view key) {
    for (ModelKind k : kAllModelKinds)
        if (model_key(k) == key) return k;
    throw Error("unknown model '" + std::string(key) + "' (expected voting, rf, adaboost, extratrees or gbm)");
}

std::size_t EnsembleModel::n_features() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, VotingPair>) return m.lr.n_features();
            else return m.n_features;
        },
        model);
}

std::size_t EnsembleModel::n_classes() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, VotingPair>) return m.lr.n_classes();
            else return m.n_classes;
        },
        model);
}

EnsembleModel fit_model(ModelKind kind, const FeatureMatrix& m, const ModelConfigs& configs) {
    switch (kind) {
        case ModelKind::voting:
            return {kind, fit_voting(m, configs.voting.lr, configs.voting.sgd, configs.voting.threads)};
        case ModelKind::random_forest: return {kind, fit_random_forest(m, configs.random_forest)};
        case ModelKind::adaboost: return {kind, fit_adaboost(m, configs.adaboost)};
        case ModelKind::extra_trees: return {kind, fit_extra_trees(m, configs.extra_trees)};
        case ModelKind::gbm: return {kind, fit_gbm(m, configs.gbm)};
    }
    throw Error("fit_model: unknown model kind");
}

int predict(const EnsembleModel& model, std::span<const double> x) {
    return std::visit(
        [&](const auto& m) -> int {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Forest>) return predict_majority(m, x);
            else if constexpr (std::is_same_v<T, AdaBoostModel>) return predict_adaboost(m, x);
            else if constexpr (std::is_same_v<T, GbmModel>) return predict_gbm(m, x);
            else return predict_voting(m, x);
        },
        model.model);
}

std::vector<int> predict_batch(const EnsembleModel& model, const FeatureMatrix& m, unsigned threads) {
    if (m.n_cols != model.n_features())
        throw MismatchError("predict: matrix has " + std::to_string(m.n_cols) + " features, model expects " +
                            std::to_string(model.n_features()));
    std::vector<int> out(m.n_rows);
    parallel_for(m.n_rows, threads, [&](std::size_t r) { out[r] = predict(model, m.row(r)); });
    return out;
}

}  // namespace accsev
