#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causal_gate/types.hpp"

namespace causal_gate::data {

struct ColumnSpec {
    std::string name;
    VariableKind kind;
    /// Labels for discrete codes 0..cardinality-1; may be empty for
    /// generated data, in which case codes print as integers.
    std::vector<std::string> categories;

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

using Schema = std::vector<ColumnSpec>;

/// Column-major dataset. Discrete cells hold their category code as an
/// exact integer-valued double. Immutable after construction.
class Table {
public:
    Table() = default;
    /// Checks shape, N >= 1, and that discrete codes lie in [0, cardinality).
    Table(Schema schema, std::vector<std::vector<double>> columns);

    std::size_t num_rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
    std::size_t num_columns() const { return schema_.size(); }
    const Schema& schema() const { return schema_; }
    const ColumnSpec& spec(std::size_t col) const { return schema_.at(col); }
    const std::vector<double>& column(std::size_t col) const { return columns_.at(col); }
    const std::vector<double>& column(std::string_view name) const { return columns_.at(require_index(name)); }
    double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    /// Throws MissingColumn.
    std::size_t require_index(std::string_view name) const;

    Table select_rows(std::span<const std::size_t> rows) const;
    Table with_column(std::size_t col, ColumnSpec spec, std::vector<double> values) const;

    friend bool operator==(const Table&, const Table&) = default;

private:
    Schema schema_;
    std::vector<std::vector<double>> columns_;
};

// Schema manifest (JSON) ---------------------------------------------------

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& doc);
Schema load_schema(const std::filesystem::path& path);

// CSV ----------------------------------------------------------------------

struct CsvOptions {
    /// Drop rows with empty cells instead of failing with MissingValue.
    bool drop_missing = false;
};

struct CsvLoadReport {
    std::size_t dropped_rows = 0;
};

/// RFC-4180 parsing. Header names may appear in any order; extra columns are
/// ignored and the result follows schema order. Discrete cells must match a
/// declared category label (or be an integer code when none are declared).
Table parse_csv(std::string_view text, const Schema& schema, const CsvOptions& options = {},
                CsvLoadReport* report = nullptr);
Table load_csv(const std::filesystem::path& path, const Schema& schema, const CsvOptions& options = {},
               CsvLoadReport* report = nullptr);

/// Writes the header and rows; doubles use shortest round-trip formatting.
std::string to_csv(const Table& table);
void save_csv(const Table& table, const std::filesystem::path& path);

/// Splits one CSV record set into fields. Exposed for the prediction-file reader.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Splitting and scaling ----------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    double sel_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Row indices of each part, in permuted order.
struct SplitIndices {
    std::vector<std::size_t> train, val, sel;
};

/// Floor sizes, remainder to train, val, sel in that order; TooFewRows if any
/// part would be empty.
SplitIndices split_indices(std::size_t n_rows, const SplitSpec& spec);

struct SplitTables {
    Table train, val, sel;
};

SplitTables split(const Table& table, const SplitSpec& spec);

nlohmann::json split_to_json(const SplitIndices& split, const SplitSpec& spec);
SplitIndices split_from_json(const nlohmann::json& doc);

enum class Side { low, high };

struct HoldoutIndices {
    std::vector<std::size_t> held_out, remainder;
};

/// The ceil(fraction * N) most extreme rows on `side`, plus every row tied
/// with the cutoff value. Both parts keep the original row order.
HoldoutIndices ood_holdout_indices(const Table& table, std::string_view column, Side side, double fraction);

struct Holdout {
    Table held_out, remainder;
};

Holdout ood_holdout(const Table& table, std::string_view column, Side side, double fraction);

/// Min-max bounds fitted per continuous column.
struct Scaler {
    std::map<std::string, std::pair<double, double>> bounds;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

Scaler fit_scaler(const Table& train);
/// (x - min) / (max - min) without clipping; a degenerate column maps to 0.
/// Columns the scaler has not seen pass through unchanged.
Table apply_scaler(const Scaler& scaler, const Table& table);

nlohmann::json scaler_to_json(const Scaler& scaler);

/// Replaces the target column. Continuous targets accept any finite values;
/// discrete targets require integer codes in range.
Table substitute_predictions(const Table& table, std::string_view target, std::span<const double> predictions);

}  // namespace causal_gate::data
