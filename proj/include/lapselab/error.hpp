#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lapselab {

enum class ErrorCode {
    // portfolio
    MissingColumn,
    BadValue,
    DuplicateId,
    InvalidConfig,
    BadK,
    EmptyDataset,
    // survival
    Empty,
    Degenerate,
    NonConvergence,
    SeparationDetected,
    NotFitted,
    TooFewSamples,
    NonFiniteLoss,
    NoComparablePairs,
    SchemaMismatch,
    // valuation
    InvalidStrategy,
    LengthMismatch,
    DiscountOutOfRange,
    AlignmentError,
    // classify
    UndefinedMetric,
    // lms
    HorizonMismatch,
    ImplicationViolated,
    EmptySubset,
    InvalidAxis,
    // io
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lapselab
