#include "causal_gate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "causal_gate/error.hpp"
#include "causal_gate/io.hpp"
#include "causal_gate/rng.hpp"

namespace causal_gate::data {

Table::Table(Schema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (schema_.size() != columns_.size())
        throw Error(ErrorCode::LengthMismatch, "schema has " + std::to_string(schema_.size()) + " columns, data has " +
                                                   std::to_string(columns_.size()));
    if (columns_.empty() || columns_.front().empty()) throw Error(ErrorCode::EmptyTable, "table needs at least one row");
    const std::size_t n = columns_.front().size();
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (columns_[c].size() != n)
            throw Error(ErrorCode::LengthMismatch, "column '" + schema_[c].name + "' has a different length");
        const VariableKind kind = schema_[c].kind;
        if (!kind.is_discrete()) continue;
        for (double v : columns_[c]) {
            if (v != std::floor(v) || v < 0 || v >= kind.cardinality)
                throw Error(ErrorCode::UnknownCategory,
                            "column '" + schema_[c].name + "' holds code " + format_double(v) + " outside [0, " +
                                std::to_string(kind.cardinality) + ")");
        }
    }
}

std::optional<std::size_t> Table::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < schema_.size(); ++i)
        if (schema_[i].name == name) return i;
    return std::nullopt;
}

std::size_t Table::require_index(std::string_view name) const {
    if (auto idx = index_of(name)) return *idx;
    throw Error(ErrorCode::MissingColumn, "missing column '" + std::string(name) + "'");
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::vector<double>> cols(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        cols[c].reserve(rows.size());
        for (std::size_t r : rows) cols[c].push_back(columns_[c].at(r));
    }
    return Table(schema_, std::move(cols));
}

Table Table::with_column(std::size_t col, ColumnSpec spec, std::vector<double> values) const {
    Schema schema = schema_;
    auto cols = columns_;
    schema.at(col) = std::move(spec);
    cols.at(col) = std::move(values);
    return Table(std::move(schema), std::move(cols));
}

// Schema manifest ----------------------------------------------------------

nlohmann::json schema_to_json(const Schema& schema) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : schema) {
        if (c.kind.is_continuous()) {
            cols.push_back({{"name", c.name}, {"kind", "continuous"}});
        } else {
            nlohmann::json entry{{"name", c.name}, {"kind", "discrete"}, {"cardinality", c.kind.cardinality}};
            if (!c.categories.empty()) entry["categories"] = c.categories;
            cols.push_back(entry);
        }
    }
    return {{"columns", cols}};
}

Schema schema_from_json(const nlohmann::json& doc) {
    try {
        Schema schema;
        for (const auto& c : doc.at("columns")) {
            ColumnSpec spec;
            spec.name = c.at("name").get<std::string>();
            const std::string kind = c.at("kind").get<std::string>();
            if (kind == "continuous") {
                spec.kind = VariableKind::continuous();
            } else if (kind == "discrete") {
                if (c.contains("categories")) spec.categories = c.at("categories").get<std::vector<std::string>>();
                const int card = c.contains("cardinality") ? c.at("cardinality").get<int>()
                                                           : static_cast<int>(spec.categories.size());
                if (card < 1) throw Error(ErrorCode::ParseError, "column '" + spec.name + "' needs categories");
                if (!spec.categories.empty() && static_cast<int>(spec.categories.size()) != card)
                    throw Error(ErrorCode::ParseError, "column '" + spec.name + "': cardinality != category count");
                spec.kind = VariableKind::discrete(card);
            } else {
                throw Error(ErrorCode::ParseError, "column '" + spec.name + "' has unknown kind '" + kind + "'");
            }
            schema.push_back(std::move(spec));
        }
        return schema;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed schema: ") + e.what());
    }
}

Schema load_schema(const std::filesystem::path& path) { return schema_from_json(io::read_json(path)); }

// CSV ----------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM

    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        if (!(record.size() == 1 && record.front().empty() && !field_started)) records.push_back(std::move(record));
        record.clear();
        field_started = false;
    };

    for (; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(ch);
                field_started = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::ParseError, "unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::optional<double> parse_number(const std::string& s) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

Table parse_csv(std::string_view text, const Schema& schema, const CsvOptions& options, CsvLoadReport* report) {
    const auto records = parse_csv_records(text);
    if (records.empty()) throw Error(ErrorCode::ParseError, "CSV has no header row");
    const auto& header = records.front();
    std::vector<std::size_t> source(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
        auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) { return trim(h) == schema[c].name; });
        if (it == header.end()) throw Error(ErrorCode::MissingColumn, "missing column '" + schema[c].name + "'");
        source[c] = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<std::vector<double>> cols(schema.size());
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::size_t line = r + 1;  // 1-based, header is line 1
        std::vector<double> row(schema.size());
        bool missing = false;
        for (std::size_t c = 0; c < schema.size() && !missing; ++c) {
            const std::string cell = source[c] < rec.size() ? trim(rec[source[c]]) : std::string();
            if (is_missing(cell)) {
                if (!options.drop_missing)
                    throw Error(ErrorCode::MissingValue,
                                "row " + std::to_string(line) + ", column '" + schema[c].name + "': missing value");
                missing = true;
                break;
            }
            const auto& spec = schema[c];
            if (spec.kind.is_continuous()) {
                auto v = parse_number(cell);
                if (!v)
                    throw Error(ErrorCode::UnparseableValue,
                                "row " + std::to_string(line) + ", column '" + spec.name + "': cannot parse '" + cell + "'");
                row[c] = *v;
            } else if (!spec.categories.empty()) {
                auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
                if (it == spec.categories.end())
                    throw Error(ErrorCode::UnknownCategory,
                                "row " + std::to_string(line) + ", column '" + spec.name + "': unknown category '" + cell + "'");
                row[c] = static_cast<double>(it - spec.categories.begin());
            } else {
                auto v = parse_number(cell);
                if (!v || *v != std::floor(*v))
                    throw Error(ErrorCode::UnparseableValue,
                                "row " + std::to_string(line) + ", column '" + spec.name + "': cannot parse '" + cell + "'");
                if (*v < 0 || *v >= spec.kind.cardinality)
                    throw Error(ErrorCode::UnknownCategory,
                                "row " + std::to_string(line) + ", column '" + spec.name + "': code " + cell + " out of range");
                row[c] = *v;
            }
        }
        if (missing) {
            ++dropped;
            continue;
        }
        for (std::size_t c = 0; c < schema.size(); ++c) cols[c].push_back(row[c]);
    }
    if (report) report->dropped_rows = dropped;
    if (cols.empty() || cols.front().empty()) throw Error(ErrorCode::EmptyTable, "CSV has no complete data rows");
    return Table(schema, std::move(cols));
}

Table load_csv(const std::filesystem::path& path, const Schema& schema, const CsvOptions& options,
               CsvLoadReport* report) {
    return parse_csv(io::read_file(path), schema, options, report);
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

namespace {

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string to_csv(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
        if (c) out.push_back(',');
        out += quote_if_needed(table.spec(c).name);
    }
    out.push_back('\n');
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        for (std::size_t c = 0; c < table.num_columns(); ++c) {
            if (c) out.push_back(',');
            const auto& spec = table.spec(c);
            const double v = table.at(r, c);
            if (spec.kind.is_discrete() && !spec.categories.empty())
                out += quote_if_needed(spec.categories[static_cast<std::size_t>(v)]);
            else
                out += format_double(v);
        }
        out.push_back('\n');
    }
    return out;
}

void save_csv(const Table& table, const std::filesystem::path& path) { io::write_file(path, to_csv(table)); }

// Splitting ----------------------------------------------------------------

void SplitSpec::validate() const {
    for (double f : {train_fraction, val_fraction, sel_fraction})
        if (!(f > 0.0 && f < 1.0)) throw Error(ErrorCode::InvalidSplit, "split fractions must lie in (0, 1)");
    if (std::abs(train_fraction + val_fraction + sel_fraction - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidSplit, "split fractions must sum to 1");
}

SplitIndices split_indices(std::size_t n_rows, const SplitSpec& spec) {
    spec.validate();
    const double n = static_cast<double>(n_rows);
    std::size_t sizes[3] = {static_cast<std::size_t>(std::floor(spec.train_fraction * n + 1e-9)),
                            static_cast<std::size_t>(std::floor(spec.val_fraction * n + 1e-9)),
                            static_cast<std::size_t>(std::floor(spec.sel_fraction * n + 1e-9))};
    std::size_t assigned = sizes[0] + sizes[1] + sizes[2];
    for (std::size_t k = 0; assigned < n_rows; k = (k + 1) % 3, ++assigned) ++sizes[k];
    if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0)
        throw Error(ErrorCode::TooFewRows, std::to_string(n_rows) + " rows cannot fill three non-empty parts");

    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(std::span<std::size_t>(perm));

    SplitIndices out;
    auto first = perm.begin();
    out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
    first += static_cast<std::ptrdiff_t>(sizes[0]);
    out.val.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
    first += static_cast<std::ptrdiff_t>(sizes[1]);
    out.sel.assign(first, perm.end());
    return out;
}

SplitTables split(const Table& table, const SplitSpec& spec) {
    const auto idx = split_indices(table.num_rows(), spec);
    return {table.select_rows(idx.train), table.select_rows(idx.val), table.select_rows(idx.sel)};
}

nlohmann::json split_to_json(const SplitIndices& split, const SplitSpec& spec) {
    return {{"fractions", {spec.train_fraction, spec.val_fraction, spec.sel_fraction}},
            {"seed", spec.seed},
            {"train", split.train},
            {"val", split.val},
            {"sel", split.sel}};
}

SplitIndices split_from_json(const nlohmann::json& doc) {
    try {
        return {doc.at("train").get<std::vector<std::size_t>>(), doc.at("val").get<std::vector<std::size_t>>(),
                doc.at("sel").get<std::vector<std::size_t>>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed split file: ") + e.what());
    }
}

HoldoutIndices ood_holdout_indices(const Table& table, std::string_view column, Side side, double fraction) {
    const std::size_t col = table.require_index(column);
    if (!table.spec(col).kind.is_continuous())
        throw Error(ErrorCode::NotContinuous, "hold-out column '" + std::string(column) + "' is not continuous");
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidConfig, "hold-out fraction must lie in (0, 1)");

    const auto& values = table.column(col);
    const std::size_t n = values.size();
    const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double cutoff = side == Side::high ? sorted[n - count] : sorted[count - 1];

    HoldoutIndices out;
    for (std::size_t r = 0; r < n; ++r) {
        const bool extreme = side == Side::high ? values[r] >= cutoff : values[r] <= cutoff;
        (extreme ? out.held_out : out.remainder).push_back(r);
    }
    if (out.remainder.empty()) throw Error(ErrorCode::TooFewRows, "hold-out consumed every row (ties at the cutoff)");
    return out;
}

Holdout ood_holdout(const Table& table, std::string_view column, Side side, double fraction) {
    const auto idx = ood_holdout_indices(table, column, side, fraction);
    return {table.select_rows(idx.held_out), table.select_rows(idx.remainder)};
}

// Scaling ------------------------------------------------------------------

Scaler fit_scaler(const Table& train) {
    Scaler s;
    for (std::size_t c = 0; c < train.num_columns(); ++c) {
        if (!train.spec(c).kind.is_continuous()) continue;
        const auto [lo, hi] = std::minmax_element(train.column(c).begin(), train.column(c).end());
        s.bounds[train.spec(c).name] = {*lo, *hi};
    }
    return s;
}

Table apply_scaler(const Scaler& scaler, const Table& table) {
    std::vector<std::vector<double>> cols;
    cols.reserve(table.num_columns());
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
        std::vector<double> col = table.column(c);
        auto it = scaler.bounds.find(table.spec(c).name);
        if (it != scaler.bounds.end() && table.spec(c).kind.is_continuous()) {
            const auto [lo, hi] = it->second;
            const double range = hi - lo;
            for (double& v : col) v = range > 0 ? (v - lo) / range : 0.0;
        }
        cols.push_back(std::move(col));
    }
    return Table(table.schema(), std::move(cols));
}

nlohmann::json scaler_to_json(const Scaler& scaler) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, b] : scaler.bounds) out[name] = {{"min", b.first}, {"max", b.second}};
    return out;
}

Table substitute_predictions(const Table& table, std::string_view target, std::span<const double> predictions) {
    const std::size_t col = table.require_index(target);
    if (predictions.size() != table.num_rows())
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(table.num_rows()) + " rows");
    const VariableKind kind = table.spec(col).kind;
    for (double p : predictions) {
        if (!std::isfinite(p)) throw Error(ErrorCode::KindMismatch, "non-finite prediction");
        if (kind.is_discrete() && (p != std::floor(p) || p < 0 || p >= kind.cardinality))
            throw Error(ErrorCode::KindMismatch,
                        "discrete target '" + std::string(target) + "' needs integer codes, got " + format_double(p));
    }
    return table.with_column(col, table.spec(col), std::vector<double>(predictions.begin(), predictions.end()));
}

}  // namespace causal_gate::data
