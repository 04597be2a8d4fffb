#include "accsev/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace accsev {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<double> parse_boolean(std::string_view s) {
    const std::string t = lower(trim(s));
    if (t == "true" || t == "t" || t == "1" || t == "yes" || t == "y") return 1.0;
    if (t == "false" || t == "f" || t == "0" || t == "no" || t == "n") return 0.0;
    return std::nullopt;
}

std::optional<int> parse_label(std::string_view s) {
    auto v = parse_number(s);
    if (!v || *v != std::floor(*v) || std::abs(*v) > 1e9) return std::nullopt;
    return static_cast<int>(*v);
}

// Howard Hinnant's days_from_civil.
long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_timestamp(double epoch_seconds) {
    const long long secs = static_cast<long long>(std::floor(epoch_seconds));
    long long days = secs / 86400;
    long long rem = secs % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    // civil_from_days
    const long long z = days + 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long long y = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u %02lld:%02lld:%02lld", y, m, d, rem / 3600,
                  (rem / 60) % 60, rem % 60);
    return buf;
}

// Reads one CSV record, which may span lines inside quoted fields.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    std::string field;
    bool quoted = false;
    while (true) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c != '\r') {
                field += c;
            }
        }
        if (!quoted) break;
        field += '\n';
        if (!std::getline(in, line)) break;
    }
    fields.push_back(std::move(field));
    return true;
}

Dataset read_dataset(std::istream& in, const FeatureSchema& schema, const LoadOptions& options) {
    std::vector<std::string> header;
    if (!read_record(in, header)) throw Error("csv: empty input, no header row");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

    // header position -> schema column
    std::vector<std::optional<std::size_t>> slot(header.size());
    std::set<std::string> seen;
    std::vector<std::string> unexpected;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name(trim(header[i]));
        if (!seen.insert(canonical_column_name(name)).second)
            throw Error("csv: duplicate header column '" + name + "'");
        if (auto s = schema.find(name)) {
            slot[i] = *s;
        } else {
            unexpected.push_back(name);
        }
    }
    std::vector<std::string> absent;
    for (const auto& c : schema.columns()) {
        if (seen.count(canonical_column_name(c.name))) continue;
        if (c.role == ColumnRole::target && !options.require_target) continue;
        absent.push_back(c.name);
    }
    if (!absent.empty() || !unexpected.empty()) {
        std::string msg = "csv: header does not match schema;";
        if (!absent.empty()) {
            msg += " missing columns:";
            for (const auto& a : absent) msg += " '" + a + "'";
            msg += ";";
        }
        if (!unexpected.empty()) {
            msg += " unexpected columns:";
            for (const auto& u : unexpected) msg += " '" + u + "'";
        }
        throw MismatchError(msg);
    }

    Dataset d;
    d.schema = schema;
    std::vector<std::optional<std::size_t>> schema_to_column(schema.columns().size());
    for (std::size_t s = 0; s < schema.columns().size(); ++s) {
        const auto& spec = schema.columns()[s];
        if (spec.role != ColumnRole::feature) continue;
        schema_to_column[s] = d.columns.size();
        d.columns.push_back(DataColumn{spec, {}, {}});
    }
    std::vector<std::unordered_map<std::string, std::size_t>> level_index(d.columns.size());

    std::vector<std::string> fields;
    std::size_t record = 0;
    while (read_record(in, fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
        if (fields.size() != header.size())
            throw Error("csv: record " + std::to_string(record + 1) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
        std::optional<int> label;
        std::vector<double> row(d.columns.size(), kMissing);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!slot[i]) continue;
            const auto& spec = schema.columns()[*slot[i]];
            const std::string_view cell = fields[i];
            if (spec.role == ColumnRole::target) {
                label = parse_label(cell);
                continue;
            }
            const auto c = schema_to_column[*slot[i]];
            if (!c) continue;
            std::optional<double> value;
            switch (spec.kind) {
                case ColumnKind::numeric: value = parse_number(cell); break;
                case ColumnKind::boolean: value = parse_boolean(cell); break;
                case ColumnKind::timestamp: value = parse_timestamp(cell); break;
                case ColumnKind::categorical: {
                    const std::string_view t = trim(cell);
                    if (t.empty()) break;
                    auto& index = level_index[*c];
                    auto [it, inserted] = index.try_emplace(std::string(t), index.size());
                    if (inserted) d.columns[*c].levels.emplace_back(t);
                    value = static_cast<double>(it->second);
                    break;
                }
            }
            if (value) row[*c] = *value;
        }
        for (std::size_t c = 0; c < row.size(); ++c) d.columns[c].cells.push_back(row[c]);
        d.labels.push_back(label);
        d.row_ids.push_back(record);
        ++record;
    }
    if (record == 0) throw Error("csv: no data rows");

    std::set<int> observed;
    for (const auto& l : d.labels)
        if (l) observed.insert(*l);
    if (!options.classes.empty()) {
        const std::set<int> declared(options.classes.begin(), options.classes.end());
        for (int v : observed)
            if (!declared.count(v))
                throw Error("csv: label " + std::to_string(v) + " is not a declared class");
        d.classes.assign(declared.begin(), declared.end());
    } else {
        d.classes.assign(observed.begin(), observed.end());
    }
    if (options.require_target && d.classes.size() < 2)
        throw Error("csv: need at least two classes, found " + std::to_string(d.classes.size()));
    return d;
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::boolean: return "boolean";
        case ColumnKind::timestamp: return "timestamp";
    }
    return "numeric";
}

std::string_view to_string(ColumnRole role) {
    switch (role) {
        case ColumnRole::feature: return "feature";
        case ColumnRole::target: return "target";
        case ColumnRole::ignored: return "ignored";
    }
    return "feature";
}

ColumnKind parse_column_kind(std::string_view text) {
    const std::string t = lower(trim(text));
    if (t == "numeric") return ColumnKind::numeric;
    if (t == "categorical") return ColumnKind::categorical;
    if (t == "boolean") return ColumnKind::boolean;
    if (t == "timestamp") return ColumnKind::timestamp;
    throw Error("schema: unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
    const std::string t = lower(trim(text));
    if (t == "feature") return ColumnRole::feature;
    if (t == "target") return ColumnRole::target;
    if (t == "ignored") return ColumnRole::ignored;
    throw Error("schema: unknown column role '" + std::string(text) + "'");
}

std::string canonical_column_name(std::string_view name) {
    std::string out;
    for (unsigned char c : trim(name)) {
        if (c == ' ' || c == '_' || c == '-') continue;
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

FeatureSchema::FeatureSchema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
    std::set<std::string> names;
    std::optional<std::size_t> target;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name.empty()) throw Error("schema: empty column name");
        if (!names.insert(canonical_column_name(columns_[i].name)).second)
            throw Error("schema: duplicate column '" + columns_[i].name + "'");
        if (columns_[i].role == ColumnRole::target) {
            if (target) throw Error("schema: more than one target column");
            target = i;
        }
    }
    if (!target) throw Error("schema: no target column");
    target_ = *target;
}

FeatureSchema FeatureSchema::parse(std::string_view text) {
    std::vector<ColumnSpec> cols;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        // the name may itself contain commas, so split from the right
        const auto last = t.rfind(',');
        const auto mid = last == std::string_view::npos ? last : t.rfind(',', last - 1);
        if (last == std::string_view::npos || mid == std::string_view::npos)
            throw Error("schema: line " + std::to_string(lineno) + " is not name,kind,role");
        cols.push_back(ColumnSpec{std::string(trim(t.substr(0, mid))),
                                  parse_column_kind(t.substr(mid + 1, last - mid - 1)),
                                  parse_column_role(t.substr(last + 1))});
    }
    return FeatureSchema(std::move(cols));
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("schema: cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string FeatureSchema::to_text() const {
    std::string out;
    for (const auto& c : columns_) {
        out += c.name;
        out += ',';
        out += to_string(c.kind);
        out += ',';
        out += to_string(c.role);
        out += '\n';
    }
    return out;
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
    const std::string key = canonical_column_name(name);
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (canonical_column_name(columns_[i].name) == key) return i;
    return std::nullopt;
}

std::vector<std::string> FeatureSchema::feature_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_)
        if (c.role == ColumnRole::feature) out.push_back(c.name);
    return out;
}

FeatureSchema FeatureSchema::with_ignored(std::string_view name) const {
    auto cols = columns_;
    auto i = find(name);
    if (!i) throw Error("schema: unknown column '" + std::string(name) + "'");
    if (cols[*i].role == ColumnRole::target) throw Error("schema: cannot ignore the target column");
    cols[*i].role = ColumnRole::ignored;
    return FeatureSchema(std::move(cols));
}

FeatureSchema us_accidents_schema() {
    using K = ColumnKind;
    using R = ColumnRole;
    return FeatureSchema({
        {"ID", K::categorical, R::ignored},
        {"Source", K::categorical, R::feature},
        {"TMC", K::numeric, R::feature},
        {"Severity", K::numeric, R::target},
        {"Start_Time", K::timestamp, R::feature},
        {"End_Time", K::timestamp, R::ignored},
        {"Start_Lat", K::numeric, R::feature},
        {"Start_Lng", K::numeric, R::feature},
        {"End_Lat", K::numeric, R::feature},
        {"End_Lng", K::numeric, R::feature},
        {"Distance(mi)", K::numeric, R::feature},
        {"Description", K::categorical, R::ignored},
        {"Number", K::numeric, R::feature},
        {"Street", K::categorical, R::feature},
        {"Side", K::categorical, R::feature},
        {"City", K::categorical, R::feature},
        {"County", K::categorical, R::feature},
        {"State", K::categorical, R::feature},
        {"Zipcode", K::categorical, R::feature},
        {"Country", K::categorical, R::feature},
        {"Timezone", K::categorical, R::feature},
        {"Airport_Code", K::categorical, R::feature},
        {"Weather_Timestamp", K::timestamp, R::ignored},
        {"Temperature(F)", K::numeric, R::feature},
        {"Wind_Chill(F)", K::numeric, R::feature},
        {"Humidity(%)", K::numeric, R::feature},
        {"Pressure(in)", K::numeric, R::feature},
        {"Visibility(mi)", K::numeric, R::feature},
        {"Wind_Direction", K::categorical, R::feature},
        {"Wind_Speed(mph)", K::numeric, R::feature},
        {"Precipitation(in)", K::numeric, R::feature},
        {"Weather_Condition", K::categorical, R::feature},
        {"Amenity", K::boolean, R::feature},
        {"Bump", K::boolean, R::feature},
        {"Crossing", K::boolean, R::feature},
        {"Give_Way", K::boolean, R::feature},
        {"Junction", K::boolean, R::feature},
        {"No_Exit", K::boolean, R::feature},
        {"Railway", K::boolean, R::feature},
        {"Roundabout", K::boolean, R::feature},
        {"Station", K::boolean, R::feature},
        {"Stop", K::boolean, R::feature},
        {"Traffic_Calming", K::boolean, R::feature},
        {"Traffic_Signal", K::boolean, R::feature},
        {"Turning_Loop", K::boolean, R::feature},
        {"Sunrise_Sunset", K::categorical, R::feature},
        {"Civil_Twilight", K::categorical, R::feature},
        {"Nautical_Twilight", K::categorical, R::feature},
        {"Astronomical_Twilight", K::categorical, R::feature},
    });
}

const DataColumn* Dataset::column(std::string_view name) const {
    const std::string key = canonical_column_name(name);
    for (const auto& c : columns)
        if (canonical_column_name(c.spec.name) == key) return &c;
    return nullptr;
}

std::size_t Dataset::missing_cells() const {
    std::size_t n = 0;
    for (const auto& c : columns)
        n += static_cast<std::size_t>(std::count_if(c.cells.begin(), c.cells.end(), is_missing));
    for (const auto& l : labels) n += !l.has_value();
    return n;
}

Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                 const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("csv: cannot open '" + path.string() + "'");
    return read_dataset(in, schema, options);
}

Dataset parse_csv(std::string_view text, const FeatureSchema& schema, const LoadOptions& options) {
    std::istringstream in{std::string(text)};
    return read_dataset(in, schema, options);
}

std::vector<std::string> split_csv_record(std::string_view line) {
    std::istringstream in{std::string(line)};
    std::vector<std::string> fields;
    read_record(in, fields);
    return fields;
}

std::string to_csv(const Dataset& d) {
    std::string out;
    const auto& cols = d.schema.columns();
    std::vector<const DataColumn*> stored(cols.size(), nullptr);
    std::vector<std::size_t> emitted;
    for (std::size_t s = 0; s < cols.size(); ++s) {
        if (cols[s].role == ColumnRole::ignored) continue;
        if (cols[s].role == ColumnRole::feature) stored[s] = d.column(cols[s].name);
        if (!emitted.empty()) out += ',';
        out += csv_escape(cols[s].name);
        emitted.push_back(s);
    }
    out += '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        bool first = true;
        for (std::size_t s : emitted) {
            if (!first) out += ',';
            first = false;
            if (cols[s].role == ColumnRole::target) {
                if (d.labels[r]) out += std::to_string(*d.labels[r]);
                continue;
            }
            const DataColumn& c = *stored[s];
            const double v = c.cells[r];
            if (is_missing(v)) continue;
            switch (c.spec.kind) {
                case ColumnKind::numeric: out += format_number(v); break;
                case ColumnKind::boolean: out += v != 0 ? "True" : "False"; break;
                case ColumnKind::categorical: out += csv_escape(c.levels[static_cast<std::size_t>(v)]); break;
                case ColumnKind::timestamp: out += format_timestamp(v); break;
            }
        }
        out += '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("csv: cannot write '" + path.string() + "'");
    out << to_csv(d);
}

Dataset preprocess(const Dataset& d, const PreprocessOptions& options) {
    if (d.rows() == 0) throw Error("preprocess: dataset is empty");
    Dataset out;
    out.schema = d.schema;
    out.classes = d.classes;
    out.log = d.log;
    const double n = static_cast<double>(d.rows());
    std::vector<const DataColumn*> kept;
    for (const auto& c : d.columns) {
        const auto missing = std::count_if(c.cells.begin(), c.cells.end(), is_missing);
        if (static_cast<double>(missing) / n > options.max_missing_ratio) {
            out.schema = out.schema.with_ignored(c.spec.name);
            out.log.dropped_columns.push_back(c.spec.name);
        } else {
            kept.push_back(&c);
        }
    }
    for (const auto* c : kept) out.columns.push_back(DataColumn{c->spec, {}, c->levels});
    for (std::size_t r = 0; r < d.rows(); ++r) {
        bool complete = d.labels[r].has_value();
        for (std::size_t i = 0; complete && i < kept.size(); ++i) complete = !is_missing(kept[i]->cells[r]);
        if (!complete) {
            ++out.log.dropped_rows;
            continue;
        }
        for (std::size_t i = 0; i < kept.size(); ++i) out.columns[i].cells.push_back(kept[i]->cells[r]);
        out.labels.push_back(d.labels[r]);
        out.row_ids.push_back(d.row_ids[r]);
    }
    if (out.rows() == 0) throw Error("preprocess: no rows left after removing partial records");
    return out;
}

std::map<int, std::size_t> class_counts(const Dataset& d) {
    std::map<int, std::size_t> counts;
    for (int c : d.classes) counts[c] = 0;
    for (const auto& l : d.labels)
        if (l) ++counts[*l];
    return counts;
}

std::vector<std::pair<std::string, double>> missing_ratios(const Dataset& d) {
    std::vector<std::pair<std::string, double>> out;
    const double n = std::max<double>(1.0, static_cast<double>(d.rows()));
    for (const auto& spec : d.schema.columns()) {
        if (spec.role == ColumnRole::target) {
            const auto missing = std::count_if(d.labels.begin(), d.labels.end(),
                                               [](const auto& l) { return !l.has_value(); });
            out.emplace_back(spec.name, static_cast<double>(missing) / n);
        } else if (const DataColumn* c = d.column(spec.name); c && spec.role == ColumnRole::feature) {
            const auto missing = std::count_if(c->cells.begin(), c->cells.end(), is_missing);
            out.emplace_back(spec.name, static_cast<double>(missing) / n);
        }
    }
    return out;
}

std::vector<std::string> Encoding::feature_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns) out.push_back(c.name);
    return out;
}

std::optional<std::size_t> FeatureMatrix::find_feature(std::string_view name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return i;
    return std::nullopt;
}

FeatureMatrix FeatureMatrix::take_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.n_rows = rows.size();
    out.n_cols = n_cols;
    out.feature_names = feature_names;
    out.class_values = class_values;
    out.values.reserve(rows.size() * n_cols);
    for (std::size_t r : rows) {
        if (r >= n_rows) throw Error("take_rows: row index out of range");
        auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
        out.labels.push_back(labels[r]);
        out.row_ids.push_back(row_ids.empty() ? r : row_ids[r]);
    }
    return out;
}

EncodedData encode(const Dataset& d) {
    if (d.missing_cells() != 0) throw Error("encode: dataset still has missing cells; preprocess first");
    EncodedData out;
    FeatureMatrix& m = out.matrix;
    Encoding& enc = out.encoding;
    enc.class_values = d.classes;

    // column-major staging, one vector per encoded column
    std::vector<std::vector<double>> staged;
    for (const auto& c : d.columns) {
        switch (c.spec.kind) {
            case ColumnKind::numeric:
            case ColumnKind::boolean:
                enc.columns.push_back(EncodedColumn{c.spec.name, c.spec.name, c.spec.kind, 0, {}});
                staged.push_back(c.cells);
                break;
            case ColumnKind::categorical: {
                EncodedColumn e{c.spec.name, c.spec.name, c.spec.kind, 0, {}};
                std::vector<double> remap(c.levels.size(), -1.0);
                std::vector<double> codes;
                codes.reserve(c.cells.size());
                for (double v : c.cells) {
                    const auto old = static_cast<std::size_t>(v);
                    if (remap[old] < 0) {
                        remap[old] = static_cast<double>(e.levels.size());
                        e.levels.push_back(c.levels[old]);
                    }
                    codes.push_back(remap[old]);
                }
                enc.columns.push_back(std::move(e));
                staged.push_back(std::move(codes));
                break;
            }
            case ColumnKind::timestamp: {
                std::vector<double> hours, days;
                for (double v : c.cells) {
                    hours.push_back(hour_of_day(v));
                    days.push_back(day_of_week(v));
                }
                enc.columns.push_back(EncodedColumn{c.spec.name + ":hour", c.spec.name, c.spec.kind, 0, {}});
                enc.columns.push_back(EncodedColumn{c.spec.name + ":weekday", c.spec.name, c.spec.kind, 1, {}});
                staged.push_back(std::move(hours));
                staged.push_back(std::move(days));
                break;
            }
        }
    }

    m.n_rows = d.rows();
    m.n_cols = staged.size();
    m.feature_names = enc.feature_names();
    m.class_values = d.classes;
    m.row_ids = d.row_ids;
    m.values.resize(m.n_rows * m.n_cols);
    for (std::size_t c = 0; c < m.n_cols; ++c)
        for (std::size_t r = 0; r < m.n_rows; ++r) m.values[r * m.n_cols + c] = staged[c][r];
    for (const auto& l : d.labels) {
        auto it = std::lower_bound(d.classes.begin(), d.classes.end(), *l);
        if (it == d.classes.end() || *it != *l)
            throw Error("encode: label " + std::to_string(*l) + " is not a declared class");
        m.labels.push_back(static_cast<int>(it - d.classes.begin()));
    }
    return out;
}

FeatureMatrix apply_encoding(const Dataset& d, const Encoding& encoding) {
    FeatureMatrix m;
    m.n_rows = d.rows();
    m.n_cols = encoding.columns.size();
    m.feature_names = encoding.feature_names();
    m.class_values = encoding.class_values;
    m.row_ids = d.row_ids;
    m.values.resize(m.n_rows * m.n_cols);

    std::vector<std::string> absent;
    for (const auto& e : encoding.columns)
        if (!d.column(e.source)) absent.push_back(e.source);
    if (!absent.empty()) {
        std::string msg = "encoding: data lacks model feature columns:";
        for (const auto& a : absent) msg += " '" + a + "'";
        throw MismatchError(msg);
    }
    for (std::size_t c = 0; c < m.n_cols; ++c) {
        const auto& e = encoding.columns[c];
        const DataColumn& src = *d.column(e.source);
        if (src.spec.kind != e.kind)
            throw MismatchError("encoding: column '" + e.source + "' is " +
                                std::string(to_string(src.spec.kind)) + ", model expects " +
                                std::string(to_string(e.kind)));
        std::vector<double> level_code;
        if (e.kind == ColumnKind::categorical) {
            std::unordered_map<std::string_view, std::size_t> known;
            for (std::size_t i = 0; i < e.levels.size(); ++i) known.emplace(e.levels[i], i);
            for (const auto& level : src.levels) {
                auto it = known.find(level);
                level_code.push_back(static_cast<double>(it == known.end() ? e.levels.size() : it->second));
            }
        }
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            const double v = src.cells[r];
            if (is_missing(v))
                throw Error("encoding: row " + std::to_string(d.row_ids[r]) + " has a missing '" +
                            e.source + "' cell");
            double x = v;
            if (e.kind == ColumnKind::categorical) x = level_code[static_cast<std::size_t>(v)];
            if (e.kind == ColumnKind::timestamp) x = e.part == 0 ? hour_of_day(v) : day_of_week(v);
            m.values[r * m.n_cols + c] = x;
        }
    }
    for (const auto& l : d.labels) {
        int index = -1;
        if (l) {
            auto it = std::find(encoding.class_values.begin(), encoding.class_values.end(), *l);
            if (it != encoding.class_values.end()) index = static_cast<int>(it - encoding.class_values.begin());
        }
        m.labels.push_back(index);
    }
    return m;
}

std::vector<std::string> decode_column(const FeatureMatrix& m, const Encoding& encoding,
                                       std::size_t encoded_column) {
    if (encoded_column >= encoding.columns.size()) throw Error("decode: column out of range");
    const auto& e = encoding.columns[encoded_column];
    std::vector<std::string> out;
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        const double v = m.at(r, encoded_column);
        switch (e.kind) {
            case ColumnKind::categorical: {
                const auto code = static_cast<std::size_t>(v);
                out.push_back(code < e.levels.size() ? e.levels[code] : std::string("<unseen>"));
                break;
            }
            case ColumnKind::boolean: out.emplace_back(v != 0 ? "true" : "false"); break;
            default: out.push_back(format_number(v)); break;
        }
    }
    return out;
}

TrainTestSplit train_test_split(const FeatureMatrix& m, const SplitOptions& options) {
    if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0))
        throw Error("split: train fraction must lie in (0, 1)");
    if (m.n_rows < 2) throw Error("split: need at least two rows");
    std::vector<std::size_t> order(m.n_rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);

    TrainTestSplit out;
    if (!options.stratify) {
        const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(m.n_rows) * options.train_fraction));
        out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    } else {
        std::vector<std::size_t> per_class(m.n_classes(), 0), taken(m.n_classes(), 0);
        for (int l : m.labels) ++per_class[static_cast<std::size_t>(l)];
        std::vector<std::size_t> quota(m.n_classes());
        for (std::size_t k = 0; k < quota.size(); ++k)
            quota[k] = static_cast<std::size_t>(std::floor(static_cast<double>(per_class[k]) * options.train_fraction));
        for (std::size_t r : order) {
            const auto k = static_cast<std::size_t>(m.labels[r]);
            (taken[k]++ < quota[k] ? out.train_rows : out.test_rows).push_back(r);
        }
    }
    if (out.train_rows.empty() || out.test_rows.empty())
        throw Error("split: degenerate split leaves an empty side");
    out.train = m.take_rows(out.train_rows);
    out.test = m.take_rows(out.test_rows);
    return out;
}

std::optional<double> parse_timestamp(std::string_view text) {
    const auto t = trim(text);
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double s = 0;
    auto num = [&](std::size_t pos, std::size_t len, int& out) {
        if (pos + len > t.size()) return false;
        auto [p, ec] = std::from_chars(t.data() + pos, t.data() + pos + len, out);
        return ec == std::errc{} && p == t.data() + pos + len;
    };
    if (t.size() < 10 || t[4] != '-' || t[7] != '-') return std::nullopt;
    if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d)) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    if (t.size() > 10) {
        if ((t[10] != ' ' && t[10] != 'T') || t.size() < 19 || t[13] != ':' || t[16] != ':') return std::nullopt;
        if (!num(11, 2, h) || !num(14, 2, mi)) return std::nullopt;
        auto sec = parse_number(t.substr(17));
        if (!sec || h > 23 || mi > 59 || *sec < 0 || *sec >= 61) return std::nullopt;
        s = *sec;
    }
    const double days = static_cast<double>(days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)));
    return days * 86400.0 + h * 3600.0 + mi * 60.0 + s;
}

int hour_of_day(double epoch_seconds) {
    const double secs = std::fmod(std::floor(epoch_seconds), 86400.0);
    return static_cast<int>((secs < 0 ? secs + 86400.0 : secs) / 3600.0);
}

int day_of_week(double epoch_seconds) {
    const auto days = static_cast<long long>(std::floor(epoch_seconds / 86400.0));
    // 1970-01-01 was a Thursday (Monday-based index 3)
    return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

}  // namespace accsev
