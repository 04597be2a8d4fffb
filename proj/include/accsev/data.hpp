#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accsev/common.hpp"

namespace accsev {

enum class ColumnKind { numeric, categorical, boolean, timestamp };
enum class ColumnRole { feature, target, ignored };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

/// Canonical form used to match column names: lower case with spaces,
/// underscores and hyphens removed, so "Weather Condition" and
/// "Weather_Condition" name the same column.
std::string canonical_column_name(std::string_view name);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    ColumnRole role = ColumnRole::feature;

    bool operator==(const ColumnSpec&) const = default;
};

/// Ordered column declarations with exactly one target column.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<ColumnSpec> columns);

    /// Parses the line-oriented `name,kind,role` format. Blank lines and
    /// lines starting with '#' are skipped.
    static FeatureSchema parse(std::string_view text);
    static FeatureSchema load(const std::filesystem::path& path);
    std::string to_text() const;

    const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
    const ColumnSpec& target() const { return columns_[target_]; }
    std::size_t target_index() const noexcept { return target_; }
    std::optional<std::size_t> find(std::string_view name) const;
    std::vector<std::string> feature_names() const;

    /// Copy with the named column's role set to `ignored`.
    FeatureSchema with_ignored(std::string_view name) const;

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<ColumnSpec> columns_;
    std::size_t target_ = 0;
};

/// Schema for the 49-column countrywide accident export. Identifier and
/// free-text columns are ignored and 'Severity' is the target.
FeatureSchema us_accidents_schema();

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return v != v; }

/// One stored feature column. Every kind is held as doubles with NaN for a
/// missing cell: numeric values as-is, booleans as 0/1, categorical cells as
/// an index into `levels`, timestamps as seconds since the Unix epoch.
struct DataColumn {
    ColumnSpec spec;
    std::vector<double> cells;
    std::vector<std::string> levels;

    bool operator==(const DataColumn&) const = default;
};

struct PreprocessLog {
    std::vector<std::string> dropped_columns;
    std::size_t dropped_rows = 0;

    bool operator==(const PreprocessLog&) const = default;
};

/// Typed table of feature columns plus the severity label per row.
struct Dataset {
    FeatureSchema schema;
    std::vector<DataColumn> columns;            // one per non-ignored feature column
    std::vector<std::optional<int>> labels;     // nullopt when the target cell is missing
    std::vector<int> classes;                   // declared class values, ascending
    std::vector<std::size_t> row_ids;           // zero-based data-row index in the source
    PreprocessLog log;

    std::size_t rows() const noexcept { return labels.size(); }
    const DataColumn* column(std::string_view name) const;
    std::size_t missing_cells() const;

    bool operator==(const Dataset&) const = default;
};

struct LoadOptions {
    /// Declared class set; empty means the sorted distinct observed labels.
    std::vector<int> classes;
    /// When false the target column may be absent from the header; every
    /// label is then missing. Used when predicting on unlabeled files.
    bool require_target = true;
};

/// Reads a comma-separated file whose header names the schema columns in any
/// order. Cells that fail to parse for their declared kind become missing.
Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                 const LoadOptions& options = {});
Dataset parse_csv(std::string_view text, const FeatureSchema& schema,
                  const LoadOptions& options = {});

/// Writes the dataset back to the format load_csv reads.
std::string to_csv(const Dataset& d);
void write_csv(const std::filesystem::path& path, const Dataset& d);

/// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split_csv_record(std::string_view line);

struct PreprocessOptions {
    double max_missing_ratio = 0.5;
};

/// Drops columns whose missing ratio exceeds the threshold, then every row
/// that still has a missing cell (including a missing label).
Dataset preprocess(const Dataset& d, const PreprocessOptions& options = {});

/// Per-class row counts keyed by class value. Declared classes with no rows
/// appear with count 0; rows without a label are not counted.
std::map<int, std::size_t> class_counts(const Dataset& d);

/// Missing-cell ratio of each stored column and of the target, in schema order.
std::vector<std::pair<std::string, double>> missing_ratios(const Dataset& d);

/// How each encoded column is derived from a schema column.
struct EncodedColumn {
    std::string name;           // encoded feature name
    std::string source;         // schema column name
    ColumnKind kind = ColumnKind::numeric;
    int part = 0;               // timestamps: 0 = hour of day, 1 = day of week
    std::vector<std::string> levels;  // categorical: code -> level text

    bool operator==(const EncodedColumn&) const = default;
};

/// Fitted mapping from a preprocessed Dataset to numeric features.
struct Encoding {
    std::vector<EncodedColumn> columns;
    std::vector<int> class_values;  // class index -> original class value

    std::vector<std::string> feature_names() const;
    bool operator==(const Encoding&) const = default;
};

/// Dense row-major numeric matrix with zero-based class labels.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;
    std::vector<std::string> feature_names;
    std::vector<int> labels;
    std::vector<int> class_values;
    std::vector<std::size_t> row_ids;

    std::size_t n_classes() const noexcept { return class_values.size(); }
    double at(std::size_t r, std::size_t c) const noexcept { return values[r * n_cols + c]; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {values.data() + r * n_cols, n_cols};
    }
    std::optional<std::size_t> find_feature(std::string_view name) const;

    /// Rows in the given order; labels and provenance follow the rows.
    FeatureMatrix take_rows(std::span<const std::size_t> rows) const;

    bool operator==(const FeatureMatrix&) const = default;
};

struct EncodedData {
    FeatureMatrix matrix;
    Encoding encoding;
};

/// Fits an encoding on a fully preprocessed dataset: numeric columns pass
/// through, booleans map to {0,1}, categorical levels get ordinal codes in
/// first-appearance order, timestamps become hour-of-day and day-of-week.
/// Labels are remapped to contiguous indices over the declared classes.
EncodedData encode(const Dataset& d);

/// Applies a previously fitted encoding. Categorical levels unseen at fit
/// time map to the code one past the last known level. Rows with missing
/// cells are not allowed; labels are optional (absent -> -1).
FeatureMatrix apply_encoding(const Dataset& d, const Encoding& encoding);

/// Original column cells decoded back to text, for checking encodings.
std::vector<std::string> decode_column(const FeatureMatrix& m, const Encoding& encoding,
                                       std::size_t encoded_column);

struct SplitOptions {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool stratify = false;
};

struct TrainTestSplit {
    FeatureMatrix train;
    FeatureMatrix test;
    std::vector<std::size_t> train_rows;  // indices into the input matrix
    std::vector<std::size_t> test_rows;
};

/// Seeded shuffle, then the first floor(n * train_fraction) rows train. With
/// stratify, the same rule is applied within every class.
TrainTestSplit train_test_split(const FeatureMatrix& m, const SplitOptions& options);

/// Seconds since the epoch for "YYYY-MM-DD HH:MM:SS[.fff]" or "YYYY-MM-DD".
std::optional<double> parse_timestamp(std::string_view text);
int hour_of_day(double epoch_seconds);
int day_of_week(double epoch_seconds);  // Monday = 0

}  // namespace accsev
