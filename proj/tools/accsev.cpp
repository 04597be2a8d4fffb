// accsev: severity-classification toolkit command line.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "accsev/experiment.hpp"

namespace {

struct CommonFlags {
    std::string data;
    std::string schema;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::string averaging;
    std::string out;
    bool paper_faithful = false;
    std::optional<unsigned> threads;
};

void add_data_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--data", f.data, "Input CSV file")->check(CLI::ExistingFile);
    cmd->add_option("--schema", f.schema, "Schema file (name,kind,role per line); default: accident schema")
        ->check(CLI::ExistingFile);
    cmd->add_option("--config", f.config, "Configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--threads", f.threads, "Worker threads (0: one per core)");
}

void add_experiment_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--k", f.k, "Number of significant features kept for phase 2");
    cmd->add_option("--averaging", f.averaging, "Precision/recall averaging")
        ->check(CLI::IsMember({"macro", "weighted"}));
    cmd->add_flag("--paper-faithful", f.paper_faithful,
                  "Compute importance on every row, test split included (leaks test data)");
}

accsev::ExperimentConfig build_config(const CommonFlags& f) {
    accsev::ExperimentConfig cfg;
    try {
        if (!f.config.empty()) cfg = accsev::load_config(f.config);
    } catch (const std::exception& e) {
        throw accsev::StageError("config", e.what());
    }
    if (!f.data.empty()) {
        cfg.data = f.data;
        cfg.synth.reset();
        cfg.missing_rates.clear();
    }
    if (!f.schema.empty()) cfg.schema = f.schema;
    if (f.seed) cfg.seed = *f.seed;
    if (f.k) cfg.k_significant = *f.k;
    if (!f.averaging.empty()) cfg.averaging = accsev::parse_averaging(f.averaging);
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.paper_faithful) cfg.paper_faithful = true;
    if (f.threads) cfg.threads = *f.threads;
    return cfg;
}

void print_report_summary(const accsev::ExperimentReport& r) {
    std::cout << accsev::format_table(r.phase1, "Phase 1: all " + std::to_string(r.data.features.size()) + " features")
              << '\n'
              << accsev::format_table(r.phase2, "Phase 2: top " + std::to_string(r.importance.k) + " significant features");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Road-accident severity classification with tree ensembles"};
    app.require_subcommand(1);
    CommonFlags f;
    std::string model_name;
    std::string model_file;
    std::string column;
    std::size_t top_n = 5;

    auto* stats = app.add_subcommand("stats", "Class counts, missing ratios and top category values");
    add_data_flags(stats, f);
    stats->add_option("--out", f.out, "Output directory")->required();
    stats->add_option("--column", column, "Categorical column for value counts (default 'Weather Condition')");
    stats->add_option("--top", top_n, "Number of values to report")->check(CLI::PositiveNumber);

    auto* experiment = app.add_subcommand("experiment", "Two-phase experiment: all features, then top-k features");
    add_data_flags(experiment, f);
    add_experiment_flags(experiment, f);
    experiment->add_option("--out", f.out, "Output directory for the report files");

    auto* train = app.add_subcommand("train", "Fit one model on every row and save it");
    add_data_flags(train, f);
    train->add_option("--model", model_name, "voting, rf, adaboost, extratrees or gbm")->required();
    train->add_option("--out", f.out, "Model file to write")->required();

    auto* predict = app.add_subcommand("predict", "Predict severity for every row of a CSV file");
    predict->add_option("--model", model_file, "Model file written by train")->required()->check(CLI::ExistingFile);
    predict->add_option("--data", f.data, "Input CSV file")->required()->check(CLI::ExistingFile);
    predict->add_option("--out", f.out, "Predictions file to write")->required();
    predict->add_option("--threads", f.threads, "Worker threads (0: one per core)");

    auto* importance = app.add_subcommand("importance", "Permutation importance of a random forest");
    add_data_flags(importance, f);
    add_experiment_flags(importance, f);
    importance->add_option("--out", f.out, "Output directory")->required();

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with planted informative columns");
    synth->add_option("--config", f.config, "Configuration file with a [synth] section")->check(CLI::ExistingFile);
    synth->add_option("--seed", f.seed, "Master seed");
    synth->add_option("--out", f.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "predict") {
            const auto s = accsev::cmd_predict(model_file, f.data, f.out, f.threads.value_or(1));
            std::cout << "predicted " << s.predicted << " of " << s.rows << " rows";
            if (s.predicted < s.rows) std::cout << " (" << s.rows - s.predicted << " incomplete rows written as NA)";
            std::cout << '\n';
            return 0;
        }
        accsev::ExperimentConfig cfg = build_config(f);
        if (command == "stats") {
            if (!column.empty()) cfg.top_values_column = column;
            accsev::cmd_stats(cfg, top_n);
            std::cout << "wrote statistics to " << cfg.out_dir.string() << '\n';
        } else if (command == "experiment") {
            const auto report = accsev::cmd_experiment(cfg);
            print_report_summary(report);
            if (!cfg.out_dir.empty()) std::cout << "\nwrote report files to " << cfg.out_dir.string() << '\n';
        } else if (command == "train") {
            accsev::ModelKind kind;
            try {
                kind = accsev::parse_model_kind(model_name);
            } catch (const std::exception& e) {
                throw accsev::StageError("config", e.what());
            }
            accsev::cmd_train(cfg, kind, f.out);
            std::cout << "wrote " << accsev::model_display_name(kind) << " model to " << f.out << '\n';
        } else if (command == "importance") {
            const auto r = accsev::cmd_importance(cfg);
            for (const auto& fi : r.ranked()) {
                if (fi.rank > r.k) break;
                std::cout << fi.rank << '\t' << fi.feature << '\t' << fi.score << '\n';
            }
        } else if (command == "synth") {
            const auto s = accsev::cmd_synth(cfg);
            std::cout << "wrote " << s.dataset.rows() << " rows (" << s.informative.size() << " informative, "
                      << s.noise.size() << " noise columns) to " << cfg.out_dir.string() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "accsev " << command << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}
