#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "accsev/data.hpp"
#include "oracles.hpp"

using namespace accsev;

namespace {

FeatureSchema small_schema() {
    return FeatureSchema({{"Severity", ColumnKind::numeric, ColumnRole::target},
                          {"Distance(mi)", ColumnKind::numeric, ColumnRole::feature},
                          {"Side", ColumnKind::categorical, ColumnRole::feature}});
}

Dataset numeric_dataset(const std::vector<std::vector<double>>& cols, const std::vector<int>& labels) {
    Dataset d;
    std::vector<ColumnSpec> specs{{"y", ColumnKind::numeric, ColumnRole::target}};
    for (std::size_t c = 0; c < cols.size(); ++c) {
        specs.push_back({"c" + std::to_string(c), ColumnKind::numeric, ColumnRole::feature});
        d.columns.push_back(DataColumn{specs.back(), cols[c], {}});
    }
    d.schema = FeatureSchema(specs);
    std::set<int> cls(labels.begin(), labels.end());
    d.classes.assign(cls.begin(), cls.end());
    for (std::size_t r = 0; r < labels.size(); ++r) {
        d.labels.emplace_back(labels[r]);
        d.row_ids.push_back(r);
    }
    return d;
}

}  // namespace

TEST_CASE("schema parse and invariants") {
    const auto s = FeatureSchema::parse("# comment\nSeverity,numeric,target\n\nSide,categorical,feature\nID,categorical,ignored\n");
    CHECK(s.columns().size() == 3);
    CHECK(s.target().name == "Severity");
    CHECK(s.feature_names() == std::vector<std::string>{"Side"});
    CHECK(FeatureSchema::parse(s.to_text()) == s);
    CHECK_THROWS_AS(FeatureSchema::parse("a,numeric,feature\n"), Error);
    CHECK_THROWS_AS(FeatureSchema::parse("a,numeric,target\nb,numeric,target\n"), Error);
    CHECK_THROWS_AS(FeatureSchema::parse("a,numeric,target\na,numeric,feature\n"), Error);
    CHECK_THROWS_AS(FeatureSchema::parse("a,text,target\n"), Error);
    CHECK_THROWS_AS(FeatureSchema::parse("a,numeric\n"), Error);
}

TEST_CASE("accident schema has 49 columns and one target") {
    const auto s = us_accidents_schema();
    CHECK(s.columns().size() == 49);
    CHECK(s.target().name == "Severity");
    CHECK(s.find("Weather Condition").has_value());
    CHECK(s.find("weather_condition").has_value());
}

TEST_CASE("load a three-row file") {
    const auto d = parse_csv("Severity,Distance(mi),Side\n2,0.5,R\n3,1.25,L\n2,0,R\n", small_schema());
    REQUIRE(d.rows() == 3);
    CHECK(d.labels == std::vector<std::optional<int>>{2, 3, 2});
    CHECK(d.classes == std::vector<int>{2, 3});
    CHECK(d.column("Distance(mi)")->cells == std::vector<double>{0.5, 1.25, 0});
    CHECK(d.column("Side")->levels == std::vector<std::string>{"R", "L"});
}

TEST_CASE("header order does not matter") {
    const auto a = parse_csv("Severity,Distance(mi),Side\n2,0.5,R\n3,1,L\n", small_schema());
    const auto b = parse_csv("Side,Severity,Distance(mi)\nR,2,0.5\nL,3,1\n", small_schema());
    CHECK(a.labels == b.labels);
    CHECK(a.columns == b.columns);
}

TEST_CASE("header mismatch lists offending columns") {
    try {
        parse_csv("Distance(mi),Side,Extra\n0.5,R,1\n", small_schema());
        FAIL("expected a mismatch");
    } catch (const MismatchError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("'Severity'") != std::string::npos);
        CHECK(msg.find("'Extra'") != std::string::npos);
    }
}

TEST_CASE("load errors") {
    CHECK_THROWS_AS(parse_csv("Severity,Distance(mi),Side\n", small_schema()), Error);
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", small_schema()), Error);
    CHECK_THROWS_AS(parse_csv("Severity,Distance(mi),Side\n2,1,R\n2,2,L\n", small_schema()), Error);  // one class
    LoadOptions declared;
    declared.classes = {1, 2};
    CHECK_THROWS_AS(parse_csv("Severity,Distance(mi),Side\n2,1,R\n5,2,L\n", small_schema(), declared), Error);
    CHECK_THROWS_AS(parse_csv("Severity,Distance(mi),Side\n2,1\n", small_schema()), Error);
}

TEST_CASE("unparsable cells become missing") {
    const auto d = parse_csv("Severity,Distance(mi),Side\n2,abc,R\n3,,\n1,2,L\n", small_schema());
    CHECK(is_missing(d.column("Distance(mi)")->cells[0]));
    CHECK(is_missing(d.column("Distance(mi)")->cells[1]));
    CHECK(is_missing(d.column("Side")->cells[1]));
    CHECK(d.missing_cells() == 3);
}

TEST_CASE("quoted fields keep commas and newlines") {
    const FeatureSchema s({{"Severity", ColumnKind::numeric, ColumnRole::target},
                           {"Description", ColumnKind::categorical, ColumnRole::ignored},
                           {"City", ColumnKind::categorical, ColumnRole::feature}});
    const auto d = parse_csv("Severity,Description,City\n2,\"a, \"\"b\"\"\nc\",\"Salt Lake, UT\"\n3,x,Reno\n", s);
    REQUIRE(d.rows() == 2);
    CHECK(d.column("City")->levels[0] == "Salt Lake, UT");
    CHECK(d.column("Description") == nullptr);
}

TEST_CASE("csv round trip") {
    const FeatureSchema s({{"Severity", ColumnKind::numeric, ColumnRole::target},
                           {"Start_Time", ColumnKind::timestamp, ColumnRole::feature},
                           {"Bump", ColumnKind::boolean, ColumnRole::feature},
                           {"City", ColumnKind::categorical, ColumnRole::feature},
                           {"Temperature(F)", ColumnKind::numeric, ColumnRole::feature}});
    const auto d = parse_csv(
        "Severity,Start_Time,Bump,City,Temperature(F)\n"
        "2,2016-02-08 05:46:00,False,\"Dayton, OH\",36.9\n"
        "3,2016-02-08 06:07:59,True,Reno,0.1\n", s);
    const auto again = parse_csv(to_csv(d), s);
    CHECK(again.labels == d.labels);
    CHECK(again.columns == d.columns);
}

TEST_CASE("preprocess leaves a complete dataset unchanged") {
    const auto d = numeric_dataset({{1, 2, 3}, {4, 5, 6}}, {1, 2, 1});
    const auto p = preprocess(d);
    CHECK(p.rows() == 3);
    CHECK(p.columns == d.columns);
    CHECK(p.log.dropped_rows == 0);
    CHECK(p.log.dropped_columns.empty());
}

TEST_CASE("preprocess drops partial rows") {
    std::vector<double> sparse(4, 1.0);
    sparse[1] = kMissing;
    const auto d = numeric_dataset({{1, 2, 3, 4}, sparse}, {1, 2, 1, 2});
    const auto p = preprocess(d);
    CHECK(p.rows() == 3);
    CHECK(p.row_ids == std::vector<std::size_t>{0, 2, 3});
    CHECK(p.log.dropped_rows == 1);
    CHECK(p.missing_cells() == 0);
}

TEST_CASE("mostly-missing column is dropped before row filtering") {
    std::vector<double> mostly(10, kMissing);
    mostly[3] = 1;
    std::vector<double> full(10);
    std::iota(full.begin(), full.end(), 0.0);
    const auto d = numeric_dataset({full, mostly}, {1, 2, 1, 2, 1, 2, 1, 2, 1, 2});
    const auto p = preprocess(d, {0.5});
    CHECK(p.rows() == 10);
    CHECK(p.columns.size() == 1);
    CHECK(p.log.dropped_columns == std::vector<std::string>{"c1"});
    CHECK(p.schema.columns()[2].role == ColumnRole::ignored);
}

TEST_CASE("preprocess errors and idempotence") {
    std::vector<double> half{kMissing, 1, kMissing, 2};
    std::vector<double> other{1, kMissing, 2, kMissing};
    CHECK_THROWS_AS(preprocess(numeric_dataset({half, other}, {1, 2, 1, 2})), Error);
    CHECK_THROWS_AS(preprocess(Dataset{}), Error);

    std::vector<double> a{1, kMissing, 3, 4, 5};
    const auto d = numeric_dataset({a, {1, 2, 3, 4, 5}}, {1, 2, 1, 2, 2});
    const auto once = preprocess(d);
    const auto twice = preprocess(once);
    CHECK(twice.columns == once.columns);
    CHECK(twice.labels == once.labels);
    CHECK(twice.row_ids == once.row_ids);
}

TEST_CASE("rows with missing labels are dropped") {
    auto d = numeric_dataset({{1, 2, 3}}, {1, 2, 1});
    d.labels[1].reset();
    CHECK(preprocess(d).rows() == 2);
}

TEST_CASE("encode booleans, categories and labels") {
    const FeatureSchema s({{"Severity", ColumnKind::numeric, ColumnRole::target},
                           {"Bump", ColumnKind::boolean, ColumnRole::feature},
                           {"Weather", ColumnKind::categorical, ColumnRole::feature},
                           {"ID", ColumnKind::categorical, ColumnRole::ignored}});
    const auto d = parse_csv("Severity,Bump,Weather,ID\n1,true,Rain,a\n2,false,Clear,b\n3,true,Rain,c\n4,false,Fog,d\n", s);
    const auto e = encode(d);
    const auto& m = e.matrix;
    REQUIRE(m.n_cols == 2);
    CHECK(m.feature_names == std::vector<std::string>{"Bump", "Weather"});
    CHECK(std::vector<double>{m.at(0, 0), m.at(1, 0), m.at(2, 0)} == std::vector<double>{1, 0, 1});
    CHECK(std::vector<double>{m.at(0, 1), m.at(1, 1), m.at(2, 1), m.at(3, 1)} == std::vector<double>{0, 1, 0, 2});
    CHECK(m.labels == std::vector<int>{0, 1, 2, 3});
    CHECK(m.class_values == std::vector<int>{1, 2, 3, 4});
    CHECK(decode_column(m, e.encoding, 1) == std::vector<std::string>{"Rain", "Clear", "Rain", "Fog"});
}

TEST_CASE("encoding follows first appearance among kept rows") {
    const FeatureSchema s({{"Severity", ColumnKind::numeric, ColumnRole::target},
                           {"W", ColumnKind::categorical, ColumnRole::feature},
                           {"x", ColumnKind::numeric, ColumnRole::feature}});
    const auto d = preprocess(parse_csv("Severity,W,x\n1,Snow,\n2,Fog,1\n1,Rain,2\n2,Fog,3\n", s));
    const auto e = encode(d);
    CHECK(e.encoding.columns[0].levels == std::vector<std::string>{"Fog", "Rain"});
    CHECK(decode_column(e.matrix, e.encoding, 0) == std::vector<std::string>{"Fog", "Rain", "Fog"});
}

TEST_CASE("timestamps decompose into hour and weekday") {
    const FeatureSchema s({{"Severity", ColumnKind::numeric, ColumnRole::target},
                           {"Start_Time", ColumnKind::timestamp, ColumnRole::feature}});
    // 2016-02-08 was a Monday
    const auto d = parse_csv("Severity,Start_Time\n1,2016-02-08 05:46:00\n2,2016-02-13 23:59:59\n", s);
    const auto e = encode(d);
    REQUIRE(e.matrix.n_cols == 2);
    CHECK(e.matrix.at(0, 0) == 5);
    CHECK(e.matrix.at(0, 1) == 0);
    CHECK(e.matrix.at(1, 0) == 23);
    CHECK(e.matrix.at(1, 1) == 5);
    CHECK(parse_timestamp("1970-01-01 00:00:00") == 0.0);
    CHECK(parse_timestamp("2000-03-01") == 951868800.0);
    CHECK_FALSE(parse_timestamp("2016-13-01 00:00:00").has_value());
    CHECK_FALSE(parse_timestamp("yesterday").has_value());
}

TEST_CASE("apply_encoding checks columns and maps unseen levels") {
    const auto train = parse_csv("Severity,Distance(mi),Side\n2,0.5,R\n3,1,L\n", small_schema());
    const auto e = encode(train);
    const auto other = parse_csv("Severity,Distance(mi),Side\n2,0.5,X\n3,1,L\n", small_schema());
    const auto m = apply_encoding(other, e.encoding);
    CHECK(m.at(0, 1) == 2);
    CHECK(m.at(1, 1) == 1);

    const FeatureSchema narrow({{"Severity", ColumnKind::numeric, ColumnRole::target},
                                {"Distance(mi)", ColumnKind::numeric, ColumnRole::feature}});
    const auto lacking = parse_csv("Severity,Distance(mi)\n2,0.5\n3,1\n", narrow);
    try {
        apply_encoding(lacking, e.encoding);
        FAIL("expected a mismatch");
    } catch (const MismatchError& err) {
        CHECK(std::string(err.what()).find("'Side'") != std::string::npos);
    }
}

TEST_CASE("train_test_split partitions rows") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        rows.push_back({static_cast<double>(i)});
        labels.push_back(i % 2);
    }
    const auto m = oracle::make_matrix(rows, labels, 2);
    const auto s = train_test_split(m, {0.7, 1, false});
    CHECK(s.train.n_rows == 7);
    CHECK(s.test.n_rows == 3);
    std::vector<std::size_t> all = s.train_rows;
    all.insert(all.end(), s.test_rows.begin(), s.test_rows.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(10);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    CHECK(all == expected);
    for (std::size_t i = 0; i < s.train_rows.size(); ++i)
        CHECK(s.train.at(i, 0) == static_cast<double>(s.train_rows[i]));

    const auto again = train_test_split(m, {0.7, 1, false});
    CHECK(again.train_rows == s.train_rows);
}

TEST_CASE("different seeds give different partitions") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        rows.push_back({static_cast<double>(i)});
        labels.push_back(i % 3);
    }
    const auto m = oracle::make_matrix(rows, labels, 3);
    const auto a = train_test_split(m, {0.7, 1, false});
    const auto b = train_test_split(m, {0.7, 2, false});
    CHECK(a.train_rows != b.train_rows);

    // class counts are conserved under the split
    std::vector<int> counts(3, 0);
    for (int y : a.train.labels) ++counts[y];
    for (int y : a.test.labels) ++counts[y];
    CHECK(counts == std::vector<int>{34, 33, 33});
}

TEST_CASE("stratified split keeps class shares") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        rows.push_back({static_cast<double>(i)});
        labels.push_back(i < 80 ? 0 : 1);
    }
    const auto m = oracle::make_matrix(rows, labels, 2);
    const auto s = train_test_split(m, {0.7, 3, true});
    CHECK(std::count(s.train.labels.begin(), s.train.labels.end(), 1) == 14);
    CHECK(std::count(s.test.labels.begin(), s.test.labels.end(), 1) == 6);
}

TEST_CASE("degenerate splits are rejected") {
    const auto m = oracle::make_matrix({{0.0}, {1.0}}, {0, 1}, 2);
    CHECK_THROWS_AS(train_test_split(m, {0.1, 1, false}), Error);
    CHECK_THROWS_AS(train_test_split(m, {1.0, 1, false}), Error);
    CHECK_THROWS_AS(train_test_split(m, {0.0, 1, false}), Error);
    const auto one = oracle::make_matrix({{0.0}}, {0}, 2);
    CHECK_THROWS_AS(train_test_split(one, {0.5, 1, false}), Error);
}

TEST_CASE("class_counts includes empty declared classes") {
    LoadOptions opts;
    opts.classes = {1, 2, 3, 4};
    const auto d = parse_csv("Severity,Distance(mi),Side\n1,0,R\n1,0,R\n2,0,R\n4,0,R\n", small_schema(), opts);
    const auto counts = class_counts(d);
    CHECK(counts == std::map<int, std::size_t>{{1, 2}, {2, 1}, {3, 0}, {4, 1}});
}

TEST_CASE("missing ratios per column") {
    const auto d = parse_csv("Severity,Distance(mi),Side\n1,,R\n2,1,\n,1,\n1,2,L\n", small_schema());
    const auto r = missing_ratios(d);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == std::pair<std::string, double>{"Severity", 0.25});
    CHECK(r[1] == std::pair<std::string, double>{"Distance(mi)", 0.25});
    CHECK(r[2] == std::pair<std::string, double>{"Side", 0.5});
}

TEST_CASE("load_csv reads files from disk") {
    const auto path = std::filesystem::temp_directory_path() / "accsev_test_load.csv";
    {
        std::ofstream out(path);
        out << "\xEF\xBB\xBFSeverity,Distance(mi),Side\r\n2,0.5,R\r\n3,1,L\r\n";
    }
    const auto d = load_csv(path, small_schema());
    CHECK(d.rows() == 2);
    CHECK(d.column("Side")->levels == std::vector<std::string>{"R", "L"});
    std::filesystem::remove(path);
}
