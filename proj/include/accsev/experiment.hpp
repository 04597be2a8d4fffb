#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accsev/data.hpp"
#include "accsev/ensembles.hpp"
#include "accsev/importance.hpp"
#include "accsev/metrics.hpp"
#include "accsev/model_io.hpp"
#include "accsev/synth.hpp"

namespace accsev {

/// Error raised by a harness command, tagged with the pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error(stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct ExperimentConfig {
    std::filesystem::path data;    // CSV input; empty means generate from `synth`
    std::filesystem::path schema;  // empty: the built-in accident schema for CSV input
    std::optional<SynthSpec> synth;
    std::optional<std::uint64_t> synth_seed;      // default: the master seed
    std::map<std::string, double> missing_rates;  // injected into synthetic data only
    std::vector<int> classes;                      // declared class values; empty: inferred
    double train_fraction = 0.7;
    bool stratify = false;
    std::uint64_t seed = 0;
    std::size_t k_significant = 20;
    Averaging averaging = Averaging::macro;
    double max_missing_ratio = 0.5;
    bool paper_faithful = false;  // importance on every row instead of the training split
    unsigned threads = 1;
    std::string top_values_column = "Weather Condition";
    ModelConfigs models;
    std::filesystem::path out_dir;

    void validate() const;
};

/// Parses the `key = value` format with `[section]` headers. Unknown
/// sections and keys are errors. Sections: experiment, synth, missing,
/// random_forest, extra_trees, adaboost, gbm, logistic, sgd.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text of every setting that affects results, in the format
/// parse_config reads. The output directory is left out.
std::string config_echo(const ExperimentConfig& cfg);

/// Per-model seeds used by every command, derived from the master seed.
ModelConfigs seeded_models(const ExperimentConfig& cfg);

struct Timing {
    std::string stage;
    std::string model;
    double milliseconds = 0;
};

struct DataSummary {
    std::size_t rows_loaded = 0;
    std::size_t rows_kept = 0;
    std::vector<std::string> dropped_columns;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::vector<int> class_values;
    std::vector<std::string> features;  // encoded feature names, phase 1
};

struct ExperimentReport {
    std::uint64_t seed = 0;
    std::string config;
    DataSummary data;
    std::vector<EvaluationRow> phase1;  // report order
    std::vector<EvaluationRow> phase2;
    ImportanceReport importance;
    std::vector<Timing> timings;

    /// Plain-text report with both tables. Contains no timings.
    std::string to_text() const;
    /// Rows of both phases as delimited text.
    std::string results_csv() const;
    std::string confusion_csv() const;
    std::string timings_csv() const;
};

/// Loads or generates the configured dataset (stage "ingest").
Dataset load_input(const ExperimentConfig& cfg);

/// The full two-phase protocol. When cfg.out_dir is set the report files
/// are written there; if any stage fails the files written so far are
/// removed and a StageError is thrown.
ExperimentReport cmd_experiment(const ExperimentConfig& cfg);

/// Writes class_counts.csv, missing_ratios.csv and top_values.csv for the
/// raw (unpreprocessed) data into cfg.out_dir.
void cmd_stats(const ExperimentConfig& cfg, std::size_t top_n = 5);

/// Top-n value counts of a categorical column, most frequent first, ties
/// in first-appearance order. Missing cells are not counted.
std::vector<std::pair<std::string, std::size_t>> top_values(const Dataset& d, std::string_view column,
                                                            std::size_t top_n);

/// Fits one model on every preprocessed row and saves it.
ModelBundle cmd_train(const ExperimentConfig& cfg, ModelKind kind, const std::filesystem::path& model_path);

struct PredictionSummary {
    std::size_t rows = 0;
    std::size_t predicted = 0;  // rows with every model column present
};

/// Predicts one severity per data row; rows missing a model column get NA.
/// Output columns: row,prediction
PredictionSummary cmd_predict(const std::filesystem::path& model_path, const std::filesystem::path& data_path,
                              const std::filesystem::path& out_path, unsigned threads = 1);

/// Importance of a random forest fitted on the training split (or every row
/// when paper-faithful); writes importance.csv and selected_features.txt.
ImportanceReport cmd_importance(const ExperimentConfig& cfg);

/// Writes data.csv, schema.txt and metadata.txt for the configured synthetic spec.
SynthData cmd_synth(const ExperimentConfig& cfg);

}  // namespace accsev
