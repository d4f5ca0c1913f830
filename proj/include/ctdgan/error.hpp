#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctdgan {

enum class ErrorCode {
    // ingestion / schema
    MissingColumn,
    UnknownCategory,
    NonFiniteValue,
    EmptyDataset,
    TargetMissing,
    InvalidSchema,
    InvalidConfig,
    FoldCountExceedsRows,
    // partitioning
    KExceedsSamples,
    DimensionMismatch,
    // transformation
    UnknownClusterColumn,
    IndexOutOfRange,
    WidthMismatch,
    // differentiation
    ShapeMismatch,
    NonFiniteIntermediate,
    NotScalarRoot,
    UnsupportedOpForSecondOrder,
    // model / training
    BatchNotPackable,
    EmptyClass,
    NonFiniteLoss,
    // sampling
    AcceptanceStalled,
    InvalidCondition,
    // evaluation
    LengthMismatch,
    EmptyClassInTruth,
    NotFitted,
    DivisionByZeroMetric,
    DegenerateInput,
    MissingCell,
    // io
    IoError,
    ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library. The code identifies the failed
/// contract; the message carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ctdgan
