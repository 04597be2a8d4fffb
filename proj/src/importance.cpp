#include "accsev/importance.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "accsev/parallel.hpp"
#include "accsev/textio.hpp"

namespace accsev {

std::vector<FeatureImportance> ImportanceReport::ranked() const {
    auto out = features;
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    return out;
}

std::string ImportanceReport::to_csv() const {
    std::string out = "feature,score\n";
    for (const auto& f : ranked()) out += f.feature + "," + textio::format_double(f.score) + "\n";
    return out;
}

ImportanceReport permutation_importance(const Forest& f, const FeatureMatrix& m, std::uint64_t seed,
                                        const FeatureMatrix* held_out, unsigned threads) {
    if (f.trees.empty()) throw Error("importance: forest has no trees");
    if (m.n_cols != f.n_features)
        throw MismatchError("importance: matrix has " + std::to_string(m.n_cols) + " features, forest expects " +
                            std::to_string(f.n_features));
    if (held_out && held_out->n_cols != f.n_features)
        throw MismatchError("importance: held-out matrix width does not match the forest");
    if (!held_out && f.oob_masks.size() != f.trees.size())
        throw Error("importance: forest has no out-of-bag masks; supply a held-out slice");

    const std::size_t T = f.trees.size();
    const std::size_t F = f.n_features;
    const FeatureMatrix& eval = held_out ? *held_out : m;
    std::vector<std::vector<double>> increase(T);  // empty when the tree is skipped

    parallel_for(T, threads, [&](std::size_t t) {
        std::vector<std::size_t> rows;
        if (held_out) {
            rows.resize(eval.n_rows);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        } else {
            const auto& mask = f.oob_masks[t];
            if (mask.size() != m.n_rows) throw Error("importance: out-of-bag mask does not match the matrix rows");
            for (std::size_t r = 0; r < m.n_rows; ++r)
                if (mask[r]) rows.push_back(r);
        }
        if (rows.empty()) return;
        const DecisionTree& tree = f.trees[t];
        const double n = static_cast<double>(rows.size());
        std::size_t base_errors = 0;
        for (std::size_t r : rows) base_errors += argmax(tree.predict(eval.row(r))) != static_cast<std::size_t>(eval.labels[r]);

        std::vector<bool> used(F, false);
        for (const auto& node : tree.nodes())
            if (!node.is_leaf()) used[static_cast<std::size_t>(node.feature)] = true;

        std::vector<double> result(F, 0.0);
        std::vector<double> column(rows.size());
        std::vector<double> x(F);
        for (std::size_t j = 0; j < F; ++j) {
            if (!used[j]) continue;  // permuting an unused feature cannot change a prediction
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = eval.at(rows[i], j);
            std::mt19937_64 rng(derive_seed(seed, t, j));
            std::shuffle(column.begin(), column.end(), rng);
            std::size_t errors = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto row = eval.row(rows[i]);
                std::copy(row.begin(), row.end(), x.begin());
                x[j] = column[i];
                errors += argmax(tree.predict(x)) != static_cast<std::size_t>(eval.labels[rows[i]]);
            }
            result[j] = (static_cast<double>(errors) - static_cast<double>(base_errors)) / n;
        }
        increase[t] = std::move(result);
    });

    ImportanceReport report;
    for (const auto& inc : increase) (inc.empty() ? report.trees_skipped : report.trees_used) += 1;
    if (report.trees_used == 0) throw Error("importance: every tree has an empty out-of-bag set");
    if (report.trees_skipped > 0)
        std::cerr << "warning: importance skipped " << report.trees_skipped << " tree(s) with empty out-of-bag sets\n";

    const double used = static_cast<double>(report.trees_used);
    for (std::size_t j = 0; j < F; ++j) {
        double sum = 0;
        for (const auto& inc : increase)
            if (!inc.empty()) sum += inc[j];
        const double mean = sum / used;
        double ss = 0;
        for (const auto& inc : increase)
            if (!inc.empty()) ss += (inc[j] - mean) * (inc[j] - mean);
        const double sd = report.trees_used > 1 ? std::sqrt(ss / (used - 1.0)) : 0.0;
        FeatureImportance fi;
        fi.feature = j < m.feature_names.size() ? m.feature_names[j] : "f" + std::to_string(j);
        fi.mean_increase = mean;
        fi.stddev = sd;
        fi.score = mean / std::max(sd, kImportanceSigmaFloor);
        report.features.push_back(std::move(fi));
    }
    std::vector<std::size_t> order(F);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.features[a].score > report.features[b].score;
    });
    for (std::size_t r = 0; r < F; ++r) report.features[order[r]].rank = r + 1;
    return report;
}

std::vector<std::string> select_top_k(ImportanceReport& report, std::size_t k) {
    if (k < 1 || k > report.features.size())
        throw Error("select_top_k: k = " + std::to_string(k) + " outside [1, " +
                    std::to_string(report.features.size()) + "]");
    const auto ranked = report.ranked();
    report.selected.clear();
    for (std::size_t i = 0; i < k; ++i) report.selected.push_back(ranked[i].feature);
    report.k = k;
    return report.selected;
}

FeatureMatrix project(const FeatureMatrix& m, std::span<const std::string> features) {
    std::vector<std::size_t> cols;
    for (const auto& name : features) {
        auto c = m.find_feature(name);
        if (!c) throw Error("project: unknown feature '" + name + "'");
        cols.push_back(*c);
    }
    FeatureMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = cols.size();
    out.feature_names.assign(features.begin(), features.end());
    out.labels = m.labels;
    out.class_values = m.class_values;
    out.row_ids = m.row_ids;
    out.values.reserve(out.n_rows * out.n_cols);
    for (std::size_t r = 0; r < m.n_rows; ++r)
        for (std::size_t c : cols) out.values.push_back(m.at(r, c));
    return out;
}

}  // namespace accsev
