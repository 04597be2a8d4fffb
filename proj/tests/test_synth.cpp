#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "accsev/synth.hpp"
#include "oracles.hpp"

using namespace accsev;

namespace {

SynthSpec acceptance_spec() {
    SynthSpec s;
    s.n_rows = 2000;
    s.n_informative = 20;
    s.n_noise = 28;
    s.n_classes = 4;
    s.seed = 7;
    return s;
}

std::vector<int> label_values(const Dataset& d) {
    std::vector<int> out;
    for (const auto& l : d.labels) out.push_back(*l);
    return out;
}

}  // namespace

TEST_CASE("default spec has the 48/20 shape") {
    const auto s = generate(acceptance_spec());
    const auto& d = s.dataset;
    CHECK(d.rows() == 2000);
    CHECK(d.columns.size() == 48);
    CHECK(s.informative.size() == 20);
    CHECK(s.noise.size() == 28);
    std::set<std::string> names;
    for (const auto& c : d.columns) names.insert(c.spec.name);
    CHECK(names.size() == 48);
    for (const auto& n : s.informative) CHECK(names.count(n) == 1);
    for (const auto& n : s.noise) CHECK(names.count(n) == 1);
    CHECK(d.classes == std::vector<int>{1, 2, 3, 4});
    CHECK(d.schema.target().name == "Severity");
    for (const auto& l : d.labels) {
        REQUIRE(l.has_value());
        CHECK(*l >= 1);
        CHECK(*l <= 4);
    }
    CHECK(d.missing_cells() == 0);
}

TEST_CASE("class frequencies follow the weights") {
    const auto s = generate(acceptance_spec());
    const auto counts = class_counts(s.dataset);
    const auto w = acceptance_spec().resolved_class_weights();
    for (std::size_t k = 0; k < 4; ++k) {
        const double expected = 2000 * w[k];
        const double sigma = std::sqrt(2000 * w[k] * (1 - w[k]));
        CHECK(std::abs(static_cast<double>(counts.at(static_cast<int>(k) + 1)) - expected) <= 4 * sigma);
    }
}

TEST_CASE("noise columns are less associated with the label than any informative column") {
    auto spec = acceptance_spec();
    for (double cat : {0.0, 0.25}) {
        spec.categorical_fraction = cat;
        const auto s = generate(spec);
        const auto labels = label_values(s.dataset);
        double min_informative = 1e300, max_noise = 0;
        for (const auto& n : s.informative)
            min_informative = std::min(min_informative, oracle::chi_square(s.dataset.column(n)->cells, labels, 6));
        for (const auto& n : s.noise)
            max_noise = std::max(max_noise, oracle::chi_square(s.dataset.column(n)->cells, labels, 6));
        CHECK(max_noise < min_informative);
    }
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = generate(acceptance_spec());
    const auto b = generate(acceptance_spec());
    CHECK(a.dataset == b.dataset);
    CHECK(a.informative == b.informative);
    auto other = acceptance_spec();
    other.seed = 8;
    CHECK_FALSE(generate(other).dataset == a.dataset);
}

TEST_CASE("invalid specs are rejected") {
    auto s = acceptance_spec();
    s.n_rows = 0;
    CHECK_THROWS_AS(generate(s), Error);
    s = acceptance_spec();
    s.n_informative = s.n_noise = 0;
    CHECK_THROWS_AS(generate(s), Error);
    s = acceptance_spec();
    s.n_classes = 1;
    CHECK_THROWS_AS(generate(s), Error);
    s = acceptance_spec();
    s.class_weights = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(generate(s), Error);
    s.class_weights = {0.5, 0.5};
    CHECK_THROWS_AS(generate(s), Error);
}

TEST_CASE("rate zero leaves the data unchanged") {
    const auto d = generate(acceptance_spec()).dataset;
    std::map<std::string, double> rates;
    for (const auto& c : d.columns) rates[c.spec.name] = 0.0;
    CHECK(inject_missing(d, rates, 1) == d);
    CHECK(inject_missing(d, {}, 1) == d);
}

TEST_CASE("rate one empties a column that preprocessing then drops") {
    const auto s = generate(acceptance_spec());
    const auto& victim = s.noise.front();
    const auto d = inject_missing(s.dataset, {{victim, 1.0}}, 3);
    for (double v : d.column(victim)->cells) CHECK(is_missing(v));
    const auto p = preprocess(d, PreprocessOptions{0.5});
    CHECK(p.column(victim) == nullptr);
    CHECK(p.rows() == 2000);
    CHECK(p.log.dropped_columns == std::vector<std::string>{victim});
}

TEST_CASE("missing counts match the binomial expectation") {
    auto spec = acceptance_spec();
    spec.n_rows = 1000;
    const auto s = generate(spec);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (const auto& name : {s.informative[0], s.noise[0]}) {
            const auto d = inject_missing(s.dataset, {{name, 0.1}}, seed);
            const auto& cells = d.column(name)->cells;
            const auto missing = std::count_if(cells.begin(), cells.end(), [](double v) { return is_missing(v); });
            CHECK(std::abs(static_cast<double>(missing) - 100.0) <= 4 * std::sqrt(1000 * 0.1 * 0.9));
        }
    }
    const auto d = inject_missing(s.dataset, {{s.noise[0], 0.1}}, 1);
    for (const auto& c : d.columns)
        if (c.spec.name != s.noise[0]) CHECK(c == *s.dataset.column(c.spec.name));
}

TEST_CASE("inject_missing rejects bad rates and names") {
    const auto d = generate(acceptance_spec()).dataset;
    CHECK_THROWS_AS(inject_missing(d, {{d.columns[0].spec.name, 1.5}}, 1), Error);
    CHECK_THROWS_AS(inject_missing(d, {{d.columns[0].spec.name, -0.1}}, 1), Error);
    CHECK_THROWS_AS(inject_missing(d, {{"no such column", 0.1}}, 1), Error);
}

TEST_CASE("generated data survives a CSV round trip") {
    auto spec = acceptance_spec();
    spec.n_rows = 300;
    spec.categorical_fraction = 0.3;
    const auto s = generate(spec);
    const auto d = inject_missing(s.dataset, {{s.noise[1], 0.2}}, 4);
    const auto path = std::filesystem::temp_directory_path() / "accsev_synth_roundtrip.csv";
    write_csv(path, d);
    const auto back = load_csv(path, d.schema, LoadOptions{d.classes, true});
    std::filesystem::remove(path);
    REQUIRE(back.columns.size() == d.columns.size());
    CHECK(back.labels == d.labels);
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
        CHECK(back.columns[c].spec == d.columns[c].spec);
        const bool categorical = d.columns[c].spec.kind == ColumnKind::categorical;
        // level indices follow first appearance, so compare level text
        auto decode = [categorical](const DataColumn& col, std::size_t r) {
            const double v = col.cells[r];
            if (is_missing(v)) return std::string("NA");
            return categorical ? col.levels[static_cast<std::size_t>(v)] : std::to_string(v);
        };
        for (std::size_t r = 0; r < d.rows(); ++r) {
            CHECK(decode(back.columns[c], r) == decode(d.columns[c], r));
            if (!categorical && !is_missing(d.columns[c].cells[r])) CHECK(back.columns[c].cells[r] == d.columns[c].cells[r]);
        }
    }
}
