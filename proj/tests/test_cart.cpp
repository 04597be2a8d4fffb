#include <doctest.h>

#include <random>
#include <sstream>

#include "accsev/cart.hpp"
#include "oracles.hpp"

using namespace accsev;

namespace {

std::vector<std::size_t> all_rows(const FeatureMatrix& m) {
    std::vector<std::size_t> rows(m.n_rows);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

FeatureMatrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t f, std::size_t k) {
    std::uniform_int_distribution<int> value(0, 8);
    std::uniform_int_distribution<int> label(0, static_cast<int>(k) - 1);
    std::vector<std::vector<double>> rows(n, std::vector<double>(f));
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (auto& v : rows[r]) v = value(rng) / 4.0;
        labels[r] = label(rng);
    }
    return oracle::make_matrix(rows, labels, k);
}

void check_leaves(const DecisionTree& t) {
    for (const auto& n : t.nodes()) {
        if (!n.is_leaf()) continue;
        double s = 0;
        for (double v : n.value) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

}  // namespace

TEST_CASE("gini impurity") {
    CHECK(gini(std::vector<double>{4, 0, 0, 0}) == 0.0);
    CHECK(gini(std::vector<double>{1, 1}) == 0.5);
    CHECK(gini(std::vector<double>{2, 1}) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
    CHECK(gini(std::vector<double>{1, 1, 1, 1}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(gini(std::vector<double>{0, 0}), Error);
    CHECK_THROWS_AS(gini(std::vector<double>{-1, 2}), Error);
    CHECK(entropy(std::vector<double>{1, 1}) == doctest::Approx(std::log(2.0)));
    CHECK(entropy(std::vector<double>{3, 0}) == 0.0);
}

TEST_CASE("gini stays within [0, 1 - 1/K]") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> c(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t K = 2 + trial % 4;
        std::vector<double> counts(K);
        double total = 0;
        for (auto& v : counts) total += v = c(rng);
        if (total == 0) continue;
        const double g = gini(counts);
        CHECK(g >= 0);
        CHECK(g <= 1.0 - 1.0 / static_cast<double>(K) + 1e-12);
    }
}

TEST_CASE("best split on a separable feature") {
    const auto m = oracle::make_matrix({{1}, {2}, {3}, {4}}, {0, 0, 1, 1}, 2);
    const std::vector<std::size_t> features{0};
    const auto s = best_split(m, all_rows(m), features, 1);
    REQUIRE(s.has_value());
    CHECK(s->feature_index == 0);
    CHECK(s->threshold == 2.5);
    CHECK(s->impurity_decrease == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s->left_count == 2);
    CHECK(s->right_count == 2);
}

TEST_CASE("no split on a pure node or a constant feature") {
    const auto pure = oracle::make_matrix({{1}, {2}, {3}}, {1, 1, 1}, 2);
    const std::vector<std::size_t> f0{0};
    CHECK_FALSE(best_split(pure, all_rows(pure), f0, 1).has_value());
    const auto flat = oracle::make_matrix({{5}, {5}, {5}}, {0, 1, 0}, 2);
    CHECK_FALSE(best_split(flat, all_rows(flat), f0, 1).has_value());
}

TEST_CASE("equal decreases go to the lower feature index") {
    const auto m = oracle::make_matrix({{1, 1}, {2, 2}, {3, 3}, {4, 4}}, {0, 0, 1, 1}, 2);
    const std::vector<std::size_t> features{1, 0};
    const auto s = best_split(m, all_rows(m), features, 1);
    REQUIRE(s.has_value());
    CHECK(s->feature_index == 0);
}

TEST_CASE("min_leaf restricts candidates") {
    const auto m = oracle::make_matrix({{1}, {2}, {3}, {4}}, {0, 1, 1, 1}, 2);
    const std::vector<std::size_t> f0{0};
    const auto free = best_split(m, all_rows(m), f0, 1);
    REQUIRE(free.has_value());
    CHECK(free->threshold == 1.5);
    const auto bounded = best_split(m, all_rows(m), f0, 2);
    REQUIRE(bounded.has_value());
    CHECK(bounded->threshold == 2.5);
    CHECK_FALSE(best_split(m, all_rows(m), f0, 3).has_value());
}

TEST_CASE("best split matches exhaustive enumeration") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + trial % 5, f = 1 + trial % 3, k = 2 + trial % 2;
        const auto m = random_matrix(rng, n, f, k);
        std::vector<std::size_t> features(f);
        for (std::size_t j = 0; j < f; ++j) features[j] = j;
        const auto got = best_split(m, all_rows(m), features, 1);
        const auto want = oracle::brute_force_split(m, all_rows(m), features, 1, kSplitTolerance);
        REQUIRE(got.has_value() == want.has_value());
        if (!got) continue;
        CHECK(got->feature_index == want->feature);
        CHECK(got->threshold == want->threshold);
        CHECK(std::abs(got->impurity_decrease - want->decrease) <= 1e-12);
    }
}

TEST_CASE("depth-2 tree fits separable data") {
    const auto m = oracle::make_matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 2, 2}, 3);
    const auto t = fit_tree(m, TreeParams{2, 2, 1, Criterion::gini});
    for (std::size_t r = 0; r < m.n_rows; ++r) CHECK(t.predict_class(m.row(r)) == m.labels[r]);
    CHECK(t.depth() <= 2);
    check_leaves(t);
}

TEST_CASE("max_depth 0 gives a majority leaf") {
    const auto m = oracle::make_matrix({{0}, {1}, {2}, {3}}, {1, 1, 0, 2}, 3);
    const auto t = fit_tree(m, TreeParams{0, 2, 1, Criterion::gini});
    CHECK(t.nodes().size() == 1);
    CHECK(t.predict_class(std::vector<double>{9}) == 1);
    const auto p = predict_tree(t, std::vector<double>{0});
    CHECK(p == std::vector<double>{0.25, 0.5, 0.25});
}

TEST_CASE("single-leaf distribution is returned for any input") {
    const DecisionTree t(1, 2, TreeParams{}, {DecisionTree::Node{-1, 0, 0, {0.25, 0.75}}});
    CHECK(predict_tree(t, std::vector<double>{-3}) == std::vector<double>{0.25, 0.75});
    CHECK(predict_tree(t, std::vector<double>{1e9}) == std::vector<double>{0.25, 0.75});
    CHECK_THROWS_AS(predict_tree(t, std::vector<double>{1, 2}), MismatchError);
}

TEST_CASE("fully grown tree reproduces training labels") {
    const auto m = oracle::make_matrix({{0.1, 5}, {0.4, 3}, {0.2, 1}, {0.9, 2}, {0.5, 7}, {0.7, 4}}, {0, 1, 2, 0, 1, 2}, 3);
    const auto t = fit_tree(m, TreeParams{-1, 2, 1, Criterion::gini});
    for (std::size_t r = 0; r < m.n_rows; ++r) CHECK(t.predict_class(m.row(r)) == m.labels[r]);
    check_leaves(t);
}

TEST_CASE("fully grown trees reach training accuracy 1 on random data") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> rows(60, std::vector<double>(3));
        std::vector<int> labels(60);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (auto& v : rows[r]) v = z(rng);
            labels[r] = static_cast<int>(rng() % 3);
        }
        const auto m = oracle::make_matrix(rows, labels, 3);
        const auto t = fit_tree(m, TreeParams{-1, 2, 1, Criterion::gini});
        for (std::size_t r = 0; r < m.n_rows; ++r) CHECK(t.predict_class(m.row(r)) == m.labels[r]);
    }
}

TEST_CASE("tree invariants on random data") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> rows(200, std::vector<double>(4));
    std::vector<int> labels(200);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (auto& v : rows[r]) v = z(rng);
        labels[r] = rows[r][0] + 0.5 * z(rng) > 0 ? 1 : 0;
    }
    const auto m = oracle::make_matrix(rows, labels, 2);
    for (int depth : {1, 3, 5}) {
        for (auto cut : {CutRule::best, CutRule::random}) {
            const auto t = fit_tree(m, TreeParams{depth, 2, 1, Criterion::gini}, FeatureSampler{2}, cut, 4);
            CHECK(t.depth() <= depth);
            check_leaves(t);
            // every internal node separates its rows with a positive impurity decrease
            std::vector<std::vector<std::size_t>> reach(t.nodes().size());
            for (std::size_t r = 0; r < m.n_rows; ++r) {
                std::size_t i = 0;
                while (true) {
                    reach[i].push_back(r);
                    const auto& n = t.nodes()[i];
                    if (n.is_leaf()) break;
                    i = m.at(r, static_cast<std::size_t>(n.feature)) <= n.threshold ? i + 1 : n.right;
                }
            }
            for (std::size_t i = 0; i < t.nodes().size(); ++i) {
                const auto& n = t.nodes()[i];
                if (n.is_leaf()) continue;
                std::vector<int> parent, left, right;
                for (auto r : reach[i]) {
                    parent.push_back(m.labels[r]);
                    (m.at(r, static_cast<std::size_t>(n.feature)) <= n.threshold ? left : right).push_back(m.labels[r]);
                }
                REQUIRE(!left.empty());
                REQUIRE(!right.empty());
                const double total = static_cast<double>(parent.size());
                const double dec = oracle::gini_of(parent, 2) - left.size() / total * oracle::gini_of(left, 2) -
                                   right.size() / total * oracle::gini_of(right, 2);
                CHECK(dec > 0);
            }
        }
    }
}

TEST_CASE("perturbing a value without crossing a threshold keeps the leaf") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> rows(100, std::vector<double>(3));
    std::vector<int> labels(100);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (auto& v : rows[r]) v = z(rng);
        labels[r] = rows[r][1] > 0.3 ? 1 : 0;
    }
    const auto m = oracle::make_matrix(rows, labels, 2);
    const auto t = fit_tree(m, TreeParams{4, 2, 1, Criterion::gini});
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x{u(rng), u(rng), u(rng)};
        const auto leaf = t.leaf_index(x);
        const std::size_t j = trial % 3;
        // largest interval around x[j] that contains no threshold on feature j
        double lo = -1e300, hi = 1e300;
        for (const auto& n : t.nodes())
            if (!n.is_leaf() && static_cast<std::size_t>(n.feature) == j) {
                if (n.threshold < x[j]) lo = std::max(lo, n.threshold);
                else hi = std::min(hi, n.threshold);
            }
        auto y = x;
        y[j] = lo > -1e300 ? (lo + x[j]) / 2 + 1e-9 : x[j] - 10;
        if (y[j] <= lo) continue;
        CHECK(t.leaf_index(y) == leaf);
        y[j] = hi < 1e300 ? (x[j] + hi) / 2 : x[j] + 10;
        CHECK(t.leaf_index(y) == leaf);
    }
}

TEST_CASE("fitting is deterministic and serializes losslessly") {
    std::mt19937_64 rng(2);
    const auto m = random_matrix(rng, 80, 3, 3);
    const auto a = fit_tree(m, TreeParams{6, 2, 1, Criterion::gini}, FeatureSampler{2}, CutRule::random, 17);
    const auto b = fit_tree(m, TreeParams{6, 2, 1, Criterion::gini}, FeatureSampler{2}, CutRule::random, 17);
    CHECK(a.to_text() == b.to_text());
    std::istringstream in(a.to_text());
    const auto back = DecisionTree::read(in);
    CHECK(back == a);
    CHECK(back.to_text() == a.to_text());
}

TEST_CASE("entropy criterion also separates clean data") {
    const auto m = oracle::make_matrix({{1}, {2}, {3}, {4}}, {0, 0, 1, 1}, 2);
    const auto t = fit_tree(m, TreeParams{-1, 2, 1, Criterion::entropy});
    for (std::size_t r = 0; r < m.n_rows; ++r) CHECK(t.predict_class(m.row(r)) == m.labels[r]);
}

TEST_CASE("malformed tree text is rejected") {
    std::istringstream wrong_version("tree v9\n");
    CHECK_THROWS_AS(DecisionTree::read(wrong_version), Error);
    std::istringstream bad_node("tree v1\nfeatures 1 outputs 2 nodes 1\nparams 3 2 1 gini\nQ 1\n");
    CHECK_THROWS_AS(DecisionTree::read(bad_node), Error);
    std::istringstream out_of_range("tree v1\nfeatures 1 outputs 2 nodes 3\nparams 3 2 1 gini\nS 4 0.5\nL 1 0\nL 0 1\n");
    CHECK_THROWS_AS(DecisionTree::read(out_of_range), Error);
    std::istringstream truncated("tree v1\nfeatures 1 outputs 2 nodes 3\nparams 3 2 1 gini\nS 0 0.5\nL 1 0\n");
    CHECK_THROWS_AS(DecisionTree::read(truncated), Error);
}
