#include "causal_gate/error.hpp"

namespace causal_gate {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::DanglingEdge: return "DanglingEdge";
        case ErrorCode::DuplicateEdge: return "DuplicateEdge";
        case ErrorCode::InvalidNode: return "InvalidNode";
        case ErrorCode::NodeSetMismatch: return "NodeSetMismatch";
        case ErrorCode::NoFeasibleMutation: return "NoFeasibleMutation";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::PriorConflict: return "PriorConflict";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::MissingValue: return "MissingValue";
        case ErrorCode::UnparseableValue: return "UnparseableValue";
        case ErrorCode::UnknownCategory: return "UnknownCategory";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::NotContinuous: return "NotContinuous";
        case ErrorCode::NotDiscrete: return "NotDiscrete";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::KindMismatch: return "KindMismatch";
        case ErrorCode::EmptyTable: return "EmptyTable";
        case ErrorCode::InvalidSplit: return "InvalidSplit";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::SingularDesign: return "SingularDesign";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::DivisionByZero: return "DivisionByZero";
        case ErrorCode::EmptyModelSet: return "EmptyModelSet";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::TooFewModels: return "TooFewModels";
        case ErrorCode::PopulationMismatch: return "PopulationMismatch";
        case ErrorCode::InvalidN: return "InvalidN";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace causal_gate
