#include "lapselab/error.hpp"

namespace lapselab {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::BadValue: return "BadValue";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::BadK: return "BadK";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::Degenerate: return "Degenerate";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::SeparationDetected: return "SeparationDetected";
        case ErrorCode::NotFitted: return "NotFitted";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::NoComparablePairs: return "NoComparablePairs";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::InvalidStrategy: return "InvalidStrategy";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DiscountOutOfRange: return "DiscountOutOfRange";
        case ErrorCode::AlignmentError: return "AlignmentError";
        case ErrorCode::UndefinedMetric: return "UndefinedMetric";
        case ErrorCode::HorizonMismatch: return "HorizonMismatch";
        case ErrorCode::ImplicationViolated: return "ImplicationViolated";
        case ErrorCode::EmptySubset: return "EmptySubset";
        case ErrorCode::InvalidAxis: return "InvalidAxis";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace lapselab
