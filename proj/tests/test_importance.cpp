#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "accsev/importance.hpp"
#include "oracles.hpp"

using namespace accsev;

namespace {

// Columns 0..n_informative-1 carry the class; the rest are pure noise.
FeatureMatrix planted(std::size_t n, std::size_t n_informative, std::size_t n_noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> rows(n);
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        labels[r] = static_cast<int>(rng() % 2);
        for (std::size_t j = 0; j < n_informative; ++j) rows[r].push_back(z(rng) + 1.5 * labels[r]);
        for (std::size_t j = 0; j < n_noise; ++j) rows[r].push_back(z(rng));
    }
    return oracle::make_matrix(rows, labels, 2);
}

Forest forest_for(const FeatureMatrix& m, std::size_t trees, std::uint64_t seed) {
    ForestConfig cfg;
    cfg.n_trees = trees;
    cfg.seed = seed;
    cfg.tree.max_depth = 6;
    return fit_random_forest(m, cfg);
}

// Direct restatement: per tree, permute column j of the evaluation rows and
// count the extra misclassifications, for every column.
std::vector<double> oracle_scores(const Forest& f, const FeatureMatrix& m, std::uint64_t seed) {
    const std::size_t F = m.n_cols;
    std::vector<std::vector<double>> inc;
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < m.n_rows; ++r)
            if (f.oob_masks[t][r]) rows.push_back(r);
        if (rows.empty()) continue;
        auto errors = [&](std::size_t j, const std::vector<double>& col) {
            double e = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                std::vector<double> x(m.row(rows[i]).begin(), m.row(rows[i]).end());
                if (j < F) x[j] = col[i];
                e += f.trees[t].predict_class(x) != m.labels[rows[i]];
            }
            return e / static_cast<double>(rows.size());
        };
        const double base = errors(F, {});
        std::vector<double> per(F);
        for (std::size_t j = 0; j < F; ++j) {
            std::vector<double> col;
            for (auto r : rows) col.push_back(m.at(r, j));
            std::mt19937_64 rng(derive_seed(seed, t, j));
            std::shuffle(col.begin(), col.end(), rng);
            per[j] = errors(j, col) - base;
        }
        inc.push_back(per);
    }
    std::vector<double> out(F);
    const double T = static_cast<double>(inc.size());
    for (std::size_t j = 0; j < F; ++j) {
        double mean = 0;
        for (const auto& v : inc) mean += v[j];
        mean /= T;
        double ss = 0;
        for (const auto& v : inc) ss += (v[j] - mean) * (v[j] - mean);
        const double sd = std::sqrt(ss / (T - 1));
        out[j] = mean / std::max(sd, 1e-12);
    }
    return out;
}

}  // namespace

TEST_CASE("scores match a direct restatement of the definition") {
    const auto m = planted(150, 2, 4, 1);
    const auto f = forest_for(m, 10, 2);
    const auto report = permutation_importance(f, m, 77);
    const auto expected = oracle_scores(f, m, 77);
    REQUIRE(report.features.size() == expected.size());
    CHECK(report.trees_used == 10);
    for (std::size_t j = 0; j < expected.size(); ++j) CHECK(report.features[j].score == doctest::Approx(expected[j]).epsilon(1e-12));
}

TEST_CASE("informative columns outrank noise") {
    const auto m = planted(400, 3, 7, 3);
    const auto f = forest_for(m, 40, 4);
    auto report = permutation_importance(f, m, 5);
    const auto top = select_top_k(report, 3);
    CHECK(std::set<std::string>(top.begin(), top.end()) == std::set<std::string>{"x0", "x1", "x2"});
}

TEST_CASE("a single planted column ranks first") {
    const auto m = planted(300, 1, 9, 6);
    const auto f = forest_for(m, 30, 7);
    const auto report = permutation_importance(f, m, 8);
    CHECK(report.features[0].rank == 1);
    CHECK(report.ranked().front().feature == "x0");
}

TEST_CASE("a constant column scores exactly zero") {
    auto m = planted(200, 2, 2, 9);
    for (std::size_t r = 0; r < m.n_rows; ++r) m.values[r * m.n_cols + 3] = 4.0;
    const auto report = permutation_importance(forest_for(m, 15, 10), m, 11);
    CHECK(report.features[3].mean_increase == 0.0);
    CHECK(report.features[3].score == 0.0);
}

TEST_CASE("ranks are a permutation with ties to the earlier column") {
    const auto m = planted(200, 2, 6, 12);
    const auto report = permutation_importance(forest_for(m, 15, 13), m, 14);
    std::vector<std::size_t> ranks;
    for (const auto& fi : report.features) ranks.push_back(fi.rank);
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < ranks.size(); ++i) CHECK(ranks[i] == i + 1);
    const auto ranked = report.ranked();
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        CHECK(ranked[i - 1].score >= ranked[i].score);
        if (ranked[i - 1].score == ranked[i].score) {
            const auto pos = [&](const std::string& n) { return *m.find_feature(n); };
            CHECK(pos(ranked[i - 1].feature) < pos(ranked[i].feature));
        }
    }
}

TEST_CASE("select_top_k bounds") {
    const auto m = planted(48 * 4, 4, 44, 15);
    ForestConfig cfg;
    cfg.n_trees = 10;
    auto report = permutation_importance(fit_random_forest(m, cfg), m, 1);
    CHECK(select_top_k(report, 20).size() == 20);
    CHECK(report.k == 20);
    CHECK(select_top_k(report, 1).size() == 1);
    const auto all = select_top_k(report, 48);
    CHECK(std::set<std::string>(all.begin(), all.end()).size() == 48);
    CHECK_THROWS_AS(select_top_k(report, 0), Error);
    CHECK_THROWS_AS(select_top_k(report, 49), Error);
}

TEST_CASE("importance is deterministic and thread independent") {
    const auto m = planted(200, 2, 4, 16);
    const auto f = forest_for(m, 12, 17);
    const auto a = permutation_importance(f, m, 18, nullptr, 1);
    const auto b = permutation_importance(f, m, 18, nullptr, 4);
    CHECK(a.to_csv() == b.to_csv());
    for (std::size_t j = 0; j < a.features.size(); ++j) CHECK(a.features[j].score == b.features[j].score);
}

TEST_CASE("extra trees need a held-out slice") {
    const auto m = planted(200, 2, 3, 19);
    const auto held = planted(100, 2, 3, 20);
    ForestConfig cfg;
    cfg.n_trees = 10;
    const auto f = fit_extra_trees(m, cfg);
    CHECK_THROWS_AS(permutation_importance(f, m, 1), Error);
    const auto report = permutation_importance(f, m, 1, &held);
    CHECK(report.trees_used == 10);
    CHECK(report.ranked().front().feature.substr(0, 1) == "x");
    const auto narrow = planted(10, 1, 1, 21);
    CHECK_THROWS_AS(permutation_importance(f, m, 1, &narrow), MismatchError);
}

TEST_CASE("project selects and orders columns") {
    const auto m = oracle::make_matrix({{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}}, {0, 1}, 2);
    std::vector<std::string> names{"x0", "x1", "x2", "x3", "x4"};
    const auto same = project(m, names);
    CHECK(same.values == m.values);
    CHECK(same.feature_names == m.feature_names);
    std::vector<std::string> two{"x3", "x1"};
    const auto p = project(m, two);
    CHECK(p.n_cols == 2);
    CHECK(p.values == std::vector<double>{4, 2, 9, 7});
    CHECK(p.labels == m.labels);
    std::vector<std::string> bad{"nope"};
    CHECK_THROWS_AS(project(m, bad), Error);
}

TEST_CASE("csv output lists features in rank order") {
    const auto m = planted(150, 1, 2, 22);
    const auto report = permutation_importance(forest_for(m, 10, 23), m, 24);
    const auto csv = report.to_csv();
    CHECK(csv.rfind("feature,score\n", 0) == 0);
    CHECK(csv.find("\nx0,") == std::string("feature,score").size());
}
