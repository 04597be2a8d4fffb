#include "accsev/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "accsev/textio.hpp"

namespace accsev {

namespace fs = std::filesystem;

namespace {

using textio::format_double;

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    while (true) {
        const auto comma = s.find(',');
        out.emplace_back(trim(s.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

class ValueParser {
public:
    ValueParser(std::size_t line, std::string key, std::string value)
        : line_(line), key_(std::move(key)), value_(std::move(value)) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw Error("config line " + std::to_string(line_) + ": '" + key_ + "' " + what + ", got '" + value_ + "'");
    }

    const std::string& text() const { return value_; }

    double real() const {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(value_, &used);
        } catch (const std::exception&) {
            fail("expects a number");
        }
        if (used != value_.size()) fail("expects a number");
        return v;
    }

    std::uint64_t u64() const {
        if (value_.empty() || value_[0] == '-' || value_[0] == '+') fail("expects a non-negative integer");
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(value_, &used);
        } catch (const std::exception&) {
            fail("expects a non-negative integer");
        }
        if (used != value_.size()) fail("expects a non-negative integer");
        return v;
    }

    std::size_t count() const { return static_cast<std::size_t>(u64()); }

    int integer() const {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(value_, &used);
        } catch (const std::exception&) {
            fail("expects an integer");
        }
        if (used != value_.size()) fail("expects an integer");
        return v;
    }

    bool boolean() const {
        if (value_ == "true" || value_ == "yes" || value_ == "1") return true;
        if (value_ == "false" || value_ == "no" || value_ == "0") return false;
        fail("expects true or false");
    }

    Criterion criterion() const {
        if (value_ == "gini") return Criterion::gini;
        if (value_ == "entropy") return Criterion::entropy;
        fail("expects gini or entropy");
    }

    std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& item : split_list(value_)) out.push_back(ValueParser(line_, key_, item).real());
        return out;
    }

    std::vector<int> integers() const {
        std::vector<int> out;
        for (const auto& item : split_list(value_)) out.push_back(ValueParser(line_, key_, item).integer());
        return out;
    }

private:
    std::size_t line_;
    std::string key_;
    std::string value_;
};

bool apply_tree_key(TreeParams& t, const std::string& key, const ValueParser& v) {
    if (key == "max_depth") t.max_depth = v.integer();
    else if (key == "min_samples_split") t.min_samples_split = v.count();
    else if (key == "min_leaf") t.min_leaf = v.count();
    else if (key == "criterion") t.criterion = v.criterion();
    else return false;
    return true;
}

bool apply_forest_key(ForestConfig& f, const std::string& key, const ValueParser& v, bool allow_bootstrap) {
    if (key == "trees") f.n_trees = v.count();
    else if (key == "max_features") f.max_features = v.count();
    else if (allow_bootstrap && key == "bootstrap") f.bootstrap = v.boolean();
    else return apply_tree_key(f.tree, key, v);
    return true;
}

bool apply_sgd_key(SgdConfig& s, const std::string& key, const ValueParser& v) {
    if (key == "learning_rate") s.learning_rate = v.real();
    else if (key == "epochs") s.epochs = v.count();
    else if (key == "batch_size") s.batch_size = v.count();
    else if (key == "l2") s.l2 = v.real();
    else return false;
    return true;
}

bool apply_key(ExperimentConfig& cfg, const std::string& section, const std::string& key, const ValueParser& v) {
    if (section == "experiment") {
        if (key == "data") cfg.data = v.text();
        else if (key == "schema") cfg.schema = v.text();
        else if (key == "out") cfg.out_dir = v.text();
        else if (key == "seed") cfg.seed = v.u64();
        else if (key == "train_fraction") cfg.train_fraction = v.real();
        else if (key == "stratify") cfg.stratify = v.boolean();
        else if (key == "k") cfg.k_significant = v.count();
        else if (key == "averaging") cfg.averaging = parse_averaging(v.text());
        else if (key == "max_missing_ratio") cfg.max_missing_ratio = v.real();
        else if (key == "paper_faithful") cfg.paper_faithful = v.boolean();
        else if (key == "threads") cfg.threads = static_cast<unsigned>(v.count());
        else if (key == "classes") cfg.classes = v.integers();
        else if (key == "top_values_column") cfg.top_values_column = v.text();
        else return false;
        return true;
    }
    if (section == "synth") {
        if (!cfg.synth) cfg.synth = SynthSpec{};
        auto& s = *cfg.synth;
        if (key == "rows") s.n_rows = v.count();
        else if (key == "informative") s.n_informative = v.count();
        else if (key == "noise") s.n_noise = v.count();
        else if (key == "classes") s.n_classes = v.count();
        else if (key == "class_weights") s.class_weights = v.reals();
        else if (key == "categorical_fraction") s.categorical_fraction = v.real();
        else if (key == "noisy_row_fraction") s.noisy_row_fraction = v.real();
        else if (key == "noisy_row_scale") s.noisy_row_scale = v.real();
        else if (key == "seed") cfg.synth_seed = v.u64();
        else return false;
        return true;
    }
    if (section == "missing") {
        cfg.missing_rates[key] = v.real();
        return true;
    }
    if (section == "random_forest") return apply_forest_key(cfg.models.random_forest, key, v, true);
    if (section == "extra_trees") return apply_forest_key(cfg.models.extra_trees, key, v, false);
    if (section == "adaboost") {
        if (key != "rounds") return false;
        cfg.models.adaboost.rounds = v.count();
        return true;
    }
    if (section == "gbm") {
        if (key == "rounds") cfg.models.gbm.rounds = v.count();
        else if (key == "shrinkage") cfg.models.gbm.shrinkage = v.real();
        else return apply_tree_key(cfg.models.gbm.tree, key, v);
        return true;
    }
    if (section == "logistic") return apply_sgd_key(cfg.models.voting.lr, key, v);
    if (section == "sgd") return apply_sgd_key(cfg.models.voting.sgd, key, v);
    return false;
}

constexpr std::string_view kSections[] = {"experiment", "synth",    "missing", "random_forest", "extra_trees",
                                          "adaboost",   "gbm",      "logistic", "sgd"};

std::string criterion_text(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }

void echo_tree(std::ostream& out, const TreeParams& t) {
    out << "max_depth = " << t.max_depth << '\n'
        << "min_samples_split = " << t.min_samples_split << '\n'
        << "min_leaf = " << t.min_leaf << '\n'
        << "criterion = " << criterion_text(t.criterion) << '\n';
}

void echo_sgd(std::ostream& out, const SgdConfig& s) {
    out << "learning_rate = " << format_double(s.learning_rate) << '\n'
        << "epochs = " << s.epochs << '\n'
        << "batch_size = " << s.batch_size << '\n'
        << "l2 = " << format_double(s.l2) << '\n';
}

template <class T>
std::string join(const std::vector<T>& items, std::string_view sep) {
    std::ostringstream out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out << sep;
        if constexpr (std::is_same_v<T, double>) out << format_double(items[i]);
        else out << items[i];
    }
    return out.str();
}

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

/// Writes text files into one directory and deletes them again unless committed.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
        if (dir_.empty()) throw Error("no output directory given (use --out)");
        std::error_code ec;
        if (!fs::exists(dir_, ec)) {
            if (!fs::create_directories(dir_, ec) || ec)
                throw Error("cannot create output directory '" + dir_.string() + "'");
            created_dir_ = true;
        } else if (!fs::is_directory(dir_, ec)) {
            throw Error("output path '" + dir_.string() + "' is not a directory");
        }
    }
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
        if (created_dir_) fs::remove(dir_, ec);  // only succeeds when empty
    }

    void write(const std::string& name, std::string_view text) {
        const fs::path p = dir_ / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + p.string() + "'");
        written_.push_back(p);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.close();
        if (!out) throw Error("failed writing '" + p.string() + "'");
    }

    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
    bool created_dir_ = false;
    bool committed_ = false;
};

SynthSpec effective_synth(const ExperimentConfig& cfg) {
    SynthSpec s = cfg.synth.value_or(SynthSpec{});
    s.seed = cfg.synth_seed.value_or(cfg.seed);
    return s;
}

FeatureSchema input_schema(const ExperimentConfig& cfg) {
    return cfg.schema.empty() ? us_accidents_schema() : FeatureSchema::load(cfg.schema);
}

struct Prepared {
    Dataset raw_summary;  // only the preprocessing log and counts are used
    std::size_t rows_loaded = 0;
    Dataset clean;
    EncodedData encoded;
};

Prepared prepare(const ExperimentConfig& cfg) {
    Prepared p;
    Dataset raw = run_stage("ingest", [&] { return load_input(cfg); });
    p.rows_loaded = raw.rows();
    p.clean = run_stage("preprocess", [&] {
        return preprocess(raw, PreprocessOptions{cfg.max_missing_ratio});
    });
    p.encoded = run_stage("encode", [&] { return encode(p.clean); });
    return p;
}

TrainTestSplit split(const ExperimentConfig& cfg, const FeatureMatrix& m) {
    return run_stage("split", [&] {
        return train_test_split(m, SplitOptions{cfg.train_fraction, cfg.seed, cfg.stratify});
    });
}

void check_k(const ExperimentConfig& cfg, std::size_t n_features) {
    if (cfg.k_significant > n_features)
        throw StageError("importance", "k = " + std::to_string(cfg.k_significant) + " exceeds the " +
                                           std::to_string(n_features) + " available features");
}

ImportanceReport importance_for(const ExperimentConfig& cfg, const ModelConfigs& models, const FeatureMatrix& all,
                                const FeatureMatrix& train, const Forest* fitted_on_train) {
    return run_stage("importance", [&] {
        const std::uint64_t shuffle_seed = derive_seed(cfg.seed, 8);
        if (cfg.paper_faithful) {
            std::cerr << "warning: paper-faithful mode computes importance on every row, "
                         "including the test split; phase-2 scores are optimistic\n";
            const Forest f = fit_random_forest(all, models.random_forest);
            return permutation_importance(f, all, shuffle_seed, nullptr, cfg.threads);
        }
        if (fitted_on_train) return permutation_importance(*fitted_on_train, train, shuffle_seed, nullptr, cfg.threads);
        const Forest f = fit_random_forest(train, models.random_forest);
        return permutation_importance(f, train, shuffle_seed, nullptr, cfg.threads);
    });
}

std::string selected_text(const ImportanceReport& r) {
    std::string out;
    for (const auto& name : r.selected) out += name + '\n';
    return out;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

Dataset take_dataset_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.schema = d.schema;
    out.classes = d.classes;
    out.log = d.log;
    for (const auto& c : d.columns) {
        DataColumn col;
        col.spec = c.spec;
        col.levels = c.levels;
        col.cells.reserve(rows.size());
        for (auto r : rows) col.cells.push_back(c.cells[r]);
        out.columns.push_back(std::move(col));
    }
    for (auto r : rows) {
        out.labels.push_back(d.labels[r]);
        out.row_ids.push_back(d.row_ids[r]);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (!(train_fraction > 0 && train_fraction < 1)) throw Error("config: train_fraction must lie in (0, 1)");
    if (k_significant < 1) throw Error("config: k must be at least 1");
    if (!(max_missing_ratio >= 0 && max_missing_ratio <= 1)) throw Error("config: max_missing_ratio must lie in [0, 1]");
    if (data.empty() && !synth) throw Error("config: no data source (give --data or a [synth] section)");
    if (!data.empty() && synth) throw Error("config: give either a data file or a [synth] section, not both");
    if (!data.empty() && !missing_rates.empty()) throw Error("config: [missing] applies to synthetic data only");
    if (synth) effective_synth(*this).validate();
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::string section = "experiment";
    std::map<std::string, std::size_t> seen;  // "section.key" -> line
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error("config line " + std::to_string(line_no) + ": malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
                throw Error("config line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            if (section == "synth" && !cfg.synth) cfg.synth = SynthSpec{};
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw Error("config line " + std::to_string(line_no) + ": empty key");
        const std::string full = section + "." + key;
        if (auto it = seen.find(full); it != seen.end())
            throw Error("config line " + std::to_string(line_no) + ": '" + key + "' already set on line " +
                        std::to_string(it->second));
        seen.emplace(full, line_no);
        try {
            if (!apply_key(cfg, section, key, ValueParser(line_no, key, value)))
                throw Error("config line " + std::to_string(line_no) + ": unknown key '" + key + "' in [" + section +
                            "]");
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    ExperimentConfig cfg = parse_config(text.str());
    // relative paths in a config file are relative to the file
    const fs::path base = path.parent_path();
    auto rebase = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    rebase(cfg.data);
    rebase(cfg.schema);
    rebase(cfg.out_dir);
    return cfg;
}

std::string config_echo(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[experiment]\n";
    if (!cfg.data.empty()) out << "data = " << cfg.data.generic_string() << '\n';
    if (!cfg.schema.empty()) out << "schema = " << cfg.schema.generic_string() << '\n';
    out << "seed = " << cfg.seed << '\n'
        << "train_fraction = " << format_double(cfg.train_fraction) << '\n'
        << "stratify = " << (cfg.stratify ? "true" : "false") << '\n'
        << "k = " << cfg.k_significant << '\n'
        << "averaging = " << to_string(cfg.averaging) << '\n'
        << "max_missing_ratio = " << format_double(cfg.max_missing_ratio) << '\n'
        << "paper_faithful = " << (cfg.paper_faithful ? "true" : "false") << '\n';
    if (!cfg.classes.empty()) out << "classes = " << join(cfg.classes, ",") << '\n';
    if (cfg.synth) {
        const SynthSpec s = effective_synth(cfg);
        out << "\n[synth]\n"
            << "rows = " << s.n_rows << '\n'
            << "informative = " << s.n_informative << '\n'
            << "noise = " << s.n_noise << '\n'
            << "classes = " << s.n_classes << '\n'
            << "class_weights = " << join(s.resolved_class_weights(), ",") << '\n'
            << "categorical_fraction = " << format_double(s.categorical_fraction) << '\n'
            << "noisy_row_fraction = " << format_double(s.noisy_row_fraction) << '\n'
            << "noisy_row_scale = " << format_double(s.noisy_row_scale) << '\n'
            << "seed = " << s.seed << '\n';
    }
    if (!cfg.missing_rates.empty()) {
        out << "\n[missing]\n";
        for (const auto& [name, rate] : cfg.missing_rates) out << name << " = " << format_double(rate) << '\n';
    }
    const auto& m = cfg.models;
    out << "\n[random_forest]\n"
        << "trees = " << m.random_forest.n_trees << '\n'
        << "max_features = " << m.random_forest.max_features << '\n'
        << "bootstrap = " << (m.random_forest.bootstrap ? "true" : "false") << '\n';
    echo_tree(out, m.random_forest.tree);
    out << "\n[extra_trees]\n"
        << "trees = " << m.extra_trees.n_trees << '\n'
        << "max_features = " << m.extra_trees.max_features << '\n';
    echo_tree(out, m.extra_trees.tree);
    out << "\n[adaboost]\n"
        << "rounds = " << m.adaboost.rounds << '\n';
    out << "\n[gbm]\n"
        << "rounds = " << m.gbm.rounds << '\n'
        << "shrinkage = " << format_double(m.gbm.shrinkage) << '\n';
    echo_tree(out, m.gbm.tree);
    out << "\n[logistic]\n";
    echo_sgd(out, m.voting.lr);
    out << "\n[sgd]\n";
    echo_sgd(out, m.voting.sgd);
    return out.str();
}

ModelConfigs seeded_models(const ExperimentConfig& cfg) {
    ModelConfigs m = cfg.models;
    m.voting.lr.seed = derive_seed(cfg.seed, 1);
    m.voting.sgd.seed = derive_seed(cfg.seed, 2);
    m.random_forest.seed = derive_seed(cfg.seed, 3);
    m.adaboost.seed = derive_seed(cfg.seed, 4);
    m.extra_trees.seed = derive_seed(cfg.seed, 5);
    m.gbm.seed = derive_seed(cfg.seed, 6);
    m.random_forest.threads = m.extra_trees.threads = m.gbm.threads = m.voting.threads = cfg.threads;
    m.extra_trees.bootstrap = false;
    return m;
}

// ---------------------------------------------------------------------------
// Report

std::string ExperimentReport::to_text() const {
    std::ostringstream out;
    out << "Severity classification experiment\n"
        << "seed: " << seed << '\n'
        << "rows: " << data.rows_loaded << " loaded, " << data.rows_kept << " after preprocessing\n"
        << "dropped columns: " << (data.dropped_columns.empty() ? "none" : join(data.dropped_columns, ", ")) << '\n'
        << "split: " << data.train_rows << " train, " << data.test_rows << " test (same rows in both phases)\n"
        << "classes: " << join(data.class_values, " ") << '\n'
        << "averaging: " << (phase1.empty() ? "macro" : std::string(to_string(phase1.front().averaging))) << "\n\n";

    out << format_table(phase1, "Phase 1: all " + std::to_string(data.features.size()) + " features") << '\n';

    out << "Significant features (top " << importance.k << ", " << importance.trees_used << " trees";
    if (importance.trees_skipped) out << ", " << importance.trees_skipped << " skipped";
    out << ")\n";
    const auto ranked = importance.ranked();
    std::size_t width = 7;
    for (std::size_t i = 0; i < importance.k && i < ranked.size(); ++i) width = std::max(width, ranked[i].feature.size());
    for (std::size_t i = 0; i < importance.k && i < ranked.size(); ++i) {
        std::string name = ranked[i].feature;
        name.append(width + 2 - name.size(), ' ');
        char rank[16];
        std::snprintf(rank, sizeof rank, "%4zu  ", ranked[i].rank);
        out << rank << name << fixed(ranked[i].score, 4) << '\n';
    }
    out << '\n';

    out << format_table(phase2, "Phase 2: top " + std::to_string(importance.k) + " significant features") << '\n';

    std::vector<std::string> zero_division;
    for (const auto* rows : {&phase1, &phase2})
        for (const auto& r : *rows)
            if (r.zero_division) zero_division.push_back(r.model + " (phase " + (rows == &phase1 ? "1" : "2") + ")");
    if (!zero_division.empty())
        out << "note: a class with no predictions or no test rows was scored 0 for: " << join(zero_division, ", ")
            << "\n\n";

    out << "Configuration\n" << config;
    return out.str();
}

std::string ExperimentReport::results_csv() const {
    return format_csv(phase1, true) + format_csv(phase2, false);
}

std::string ExperimentReport::confusion_csv() const {
    std::string out = "model,phase,true_class,predicted_class,count\n";
    for (const auto* rows : {&phase1, &phase2})
        for (const auto& r : *rows) {
            const auto& cm = r.confusion;
            for (std::size_t i = 0; i < cm.classes(); ++i)
                for (std::size_t j = 0; j < cm.classes(); ++j)
                    out += r.model + "," + std::string(to_string(r.phase)) + "," +
                           std::to_string(data.class_values.at(i)) + "," + std::to_string(data.class_values.at(j)) +
                           "," + std::to_string(cm.at(i, j)) + "\n";
        }
    return out;
}

std::string ExperimentReport::timings_csv() const {
    std::string out = "stage,model,milliseconds\n";
    for (const auto& t : timings) out += t.stage + "," + t.model + "," + fixed(t.milliseconds, 3) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Commands

Dataset load_input(const ExperimentConfig& cfg) {
    if (!cfg.data.empty()) {
        LoadOptions opts;
        opts.classes = cfg.classes;
        return load_csv(cfg.data, input_schema(cfg), opts);
    }
    if (!cfg.synth) throw Error("no data source (give --data or a [synth] section)");
    Dataset d = generate(effective_synth(cfg)).dataset;
    if (!cfg.missing_rates.empty()) d = inject_missing(d, cfg.missing_rates, derive_seed(cfg.seed, 9));
    return d;
}

ExperimentReport cmd_experiment(const ExperimentConfig& cfg) {
    run_stage("config", [&] { cfg.validate(); });
    std::optional<OutputSet> outputs;
    if (!cfg.out_dir.empty()) run_stage("output", [&] { outputs.emplace(cfg.out_dir); });

    ExperimentReport report;
    report.seed = cfg.seed;
    report.config = config_echo(cfg);
    const ModelConfigs models = seeded_models(cfg);

    auto t0 = Clock::now();
    Prepared p = prepare(cfg);
    report.timings.push_back({"prepare", "", elapsed_ms(t0)});
    const FeatureMatrix& all = p.encoded.matrix;
    const TrainTestSplit sp = split(cfg, all);
    check_k(cfg, all.n_cols);

    report.data.rows_loaded = p.rows_loaded;
    report.data.rows_kept = p.clean.rows();
    report.data.dropped_columns = p.clean.log.dropped_columns;
    report.data.train_rows = sp.train.n_rows;
    report.data.test_rows = sp.test.n_rows;
    report.data.class_values = all.class_values;
    report.data.features = all.feature_names;

    std::optional<Forest> phase1_forest;
    auto run_phase = [&](Phase phase, const FeatureMatrix& train, const FeatureMatrix& test) {
        const char* stage = phase == Phase::all_features ? "phase1" : "phase2";
        std::vector<EvaluationRow> rows;
        for (ModelKind kind : kAllModelKinds) {
            run_stage(stage, [&] {
                auto t = Clock::now();
                EnsembleModel model = fit_model(kind, train, models);
                report.timings.push_back({std::string(stage) + "_fit", std::string(model_key(kind)), elapsed_ms(t)});
                t = Clock::now();
                const auto predicted = predict_batch(model, test, cfg.threads);
                const auto cm = confusion(test.labels, predicted, test.n_classes());
                rows.push_back(accsev::report(std::string(model_display_name(kind)), cm, cfg.averaging, phase));
                report.timings.push_back(
                    {std::string(stage) + "_evaluate", std::string(model_key(kind)), elapsed_ms(t)});
                if (phase == Phase::all_features && kind == ModelKind::random_forest)
                    phase1_forest = std::get<Forest>(std::move(model.model));
            });
        }
        return rows;
    };

    report.phase1 = run_phase(Phase::all_features, sp.train, sp.test);

    t0 = Clock::now();
    report.importance = importance_for(cfg, models, all, sp.train, phase1_forest ? &*phase1_forest : nullptr);
    select_top_k(report.importance, cfg.k_significant);
    report.timings.push_back({"importance", "rf", elapsed_ms(t0)});
    phase1_forest.reset();

    const auto [train2, test2] = run_stage("select", [&] {
        return std::pair{project(sp.train, report.importance.selected), project(sp.test, report.importance.selected)};
    });
    report.phase2 = run_phase(Phase::significant_features, train2, test2);

    if (outputs) {
        run_stage("write", [&] {
            outputs->write("report.txt", report.to_text());
            outputs->write("results.csv", report.results_csv());
            outputs->write("confusion.csv", report.confusion_csv());
            outputs->write("importance.csv", report.importance.to_csv());
            outputs->write("selected_features.txt", selected_text(report.importance));
            outputs->write("timings.csv", report.timings_csv());
        });
        outputs->commit();
    }
    return report;
}

std::vector<std::pair<std::string, std::size_t>> top_values(const Dataset& d, std::string_view column,
                                                            std::size_t top_n) {
    const DataColumn* col = d.column(column);
    if (!col) throw Error("no column named '" + std::string(column) + "'");
    std::vector<std::pair<std::string, std::size_t>> counts;
    if (col->spec.kind == ColumnKind::categorical) {
        for (const auto& level : col->levels) counts.emplace_back(level, 0);
        for (double v : col->cells)
            if (!is_missing(v)) ++counts[static_cast<std::size_t>(v)].second;
    } else if (col->spec.kind == ColumnKind::boolean) {
        counts = {{"True", 0}, {"False", 0}};
        for (double v : col->cells)
            if (!is_missing(v)) ++counts[v == 0 ? 1 : 0].second;
    } else {
        throw Error("column '" + col->spec.name + "' is " + std::string(to_string(col->spec.kind)) +
                    "; value counts need a categorical or boolean column");
    }
    std::erase_if(counts, [](const auto& c) { return c.second == 0; });
    std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (counts.size() > top_n) counts.resize(top_n);
    return counts;
}

void cmd_stats(const ExperimentConfig& cfg, std::size_t top_n) {
    if (cfg.data.empty() && !cfg.synth) throw StageError("config", "no data source (give --data or a [synth] section)");
    OutputSet outputs = run_stage("output", [&] { return OutputSet(cfg.out_dir); });
    const Dataset d = run_stage("ingest", [&] { return load_input(cfg); });
    run_stage("stats", [&] {
        std::string counts = "class,count\n";
        for (const auto& [cls, n] : class_counts(d)) counts += std::to_string(cls) + "," + std::to_string(n) + "\n";
        std::string ratios = "column,missing_ratio\n";
        for (const auto& [name, r] : missing_ratios(d)) ratios += name + "," + fixed(r, 6) + "\n";
        outputs.write("class_counts.csv", counts);
        outputs.write("missing_ratios.csv", ratios);
        if (!cfg.top_values_column.empty()) {
            if (!d.column(cfg.top_values_column)) {
                std::cerr << "note: no column '" << cfg.top_values_column << "', top values skipped\n";
            } else {
                std::string top = "value,count\n";
                for (const auto& [value, n] : top_values(d, cfg.top_values_column, top_n))
                    top += value + "," + std::to_string(n) + "\n";
                outputs.write("top_values.csv", top);
            }
        }
    });
    outputs.commit();
}

ModelBundle cmd_train(const ExperimentConfig& cfg, ModelKind kind, const fs::path& model_path) {
    run_stage("config", [&] { cfg.validate(); });
    if (model_path.empty()) throw StageError("config", "no model file given (use --out)");
    Prepared p = prepare(cfg);
    ModelBundle bundle;
    bundle.schema = p.clean.schema;
    bundle.encoding = p.encoded.encoding;
    bundle.model = run_stage("train", [&] { return fit_model(kind, p.encoded.matrix, seeded_models(cfg)); });
    run_stage("write", [&] {
        try {
            save_bundle(model_path, bundle);
        } catch (...) {
            std::error_code ec;
            fs::remove(model_path, ec);
            throw;
        }
    });
    return bundle;
}

PredictionSummary cmd_predict(const fs::path& model_path, const fs::path& data_path, const fs::path& out_path,
                              unsigned threads) {
    if (out_path.empty()) throw StageError("config", "no predictions file given (use --out)");
    const ModelBundle bundle = run_stage("load-model", [&] { return load_bundle(model_path); });
    const Dataset d = run_stage("ingest", [&] {
        LoadOptions opts;
        opts.require_target = false;
        opts.classes = bundle.encoding.class_values;
        return load_csv(data_path, bundle.schema, opts);
    });
    PredictionSummary summary;
    summary.rows = d.rows();
    std::vector<std::optional<int>> predictions(d.rows());
    run_stage("predict", [&] {
        std::vector<const DataColumn*> used;
        for (const auto& e : bundle.encoding.columns) {
            const DataColumn* c = d.column(e.source);
            if (!c) throw MismatchError("data lacks model feature column '" + e.source + "'");
            used.push_back(c);
        }
        std::vector<std::size_t> complete;
        for (std::size_t r = 0; r < d.rows(); ++r)
            if (std::none_of(used.begin(), used.end(), [&](const DataColumn* c) { return is_missing(c->cells[r]); }))
                complete.push_back(r);
        if (complete.empty()) return;
        const auto values = predict_values(bundle, take_dataset_rows(d, complete), threads);
        for (std::size_t i = 0; i < complete.size(); ++i) predictions[complete[i]] = values[i];
        summary.predicted = complete.size();
    });
    run_stage("write", [&] {
        std::string text = "row,prediction\n";
        for (std::size_t r = 0; r < d.rows(); ++r)
            text += std::to_string(d.row_ids[r]) + "," +
                    (predictions[r] ? std::to_string(*predictions[r]) : std::string("NA")) + "\n";
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + out_path.string() + "'");
        out << text;
        out.close();
        if (!out) {
            std::error_code ec;
            fs::remove(out_path, ec);
            throw Error("failed writing '" + out_path.string() + "'");
        }
    });
    return summary;
}

ImportanceReport cmd_importance(const ExperimentConfig& cfg) {
    run_stage("config", [&] { cfg.validate(); });
    OutputSet outputs = run_stage("output", [&] { return OutputSet(cfg.out_dir); });
    Prepared p = prepare(cfg);
    const FeatureMatrix& all = p.encoded.matrix;
    const TrainTestSplit sp = split(cfg, all);
    check_k(cfg, all.n_cols);
    ImportanceReport r = importance_for(cfg, seeded_models(cfg), all, sp.train, nullptr);
    select_top_k(r, cfg.k_significant);
    run_stage("write", [&] {
        outputs.write("importance.csv", r.to_csv());
        outputs.write("selected_features.txt", selected_text(r));
    });
    outputs.commit();
    return r;
}

SynthData cmd_synth(const ExperimentConfig& cfg) {
    if (!cfg.data.empty()) throw StageError("config", "synth generates data; do not pass --data");
    ExperimentConfig c = cfg;
    if (!c.synth) c.synth = SynthSpec{};
    run_stage("config", [&] { c.validate(); });
    OutputSet outputs = run_stage("output", [&] { return OutputSet(c.out_dir); });
    SynthData s = run_stage("generate", [&] {
        SynthData g = generate(effective_synth(c));
        if (!c.missing_rates.empty()) g.dataset = inject_missing(g.dataset, c.missing_rates, derive_seed(c.seed, 9));
        return g;
    });
    run_stage("write", [&] {
        outputs.write("data.csv", to_csv(s.dataset));
        outputs.write("schema.txt", s.dataset.schema.to_text());
        std::string meta = config_echo(c);
        meta += "\n[columns]\ninformative = " + join(s.informative, ",") + "\nnoise = " + join(s.noise, ",") + "\n";
        outputs.write("metadata.txt", meta);
    });
    outputs.commit();
    return s;
}

}  // namespace accsev
