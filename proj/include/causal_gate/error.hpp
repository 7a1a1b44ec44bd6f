#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causal_gate {

enum class ErrorCode {
    // graph
    CycleDetected,
    DanglingEdge,
    DuplicateEdge,
    InvalidNode,
    NodeSetMismatch,
    NoFeasibleMutation,
    TooLarge,
    PriorConflict,
    // data
    MissingColumn,
    MissingValue,
    UnparseableValue,
    UnknownCategory,
    TooFewRows,
    NotContinuous,
    NotDiscrete,
    LengthMismatch,
    KindMismatch,
    EmptyTable,
    InvalidSplit,
    // scoring
    SchemaMismatch,
    SingularDesign,
    NonConvergence,
    // cam / eval
    InvalidConfig,
    DivisionByZero,
    EmptyModelSet,
    SingleClass,
    TooFewModels,
    PopulationMismatch,
    // synth / mlp
    InvalidN,
    NonFinite,
    Diverged,
    WidthMismatch,
    // io
    IoError,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a stable code; the CLI maps it to exit status 2.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace causal_gate
