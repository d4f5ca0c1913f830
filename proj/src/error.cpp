#include "ctdgan/error.hpp"

namespace ctdgan {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::UnknownCategory: return "UnknownCategory";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::TargetMissing: return "TargetMissing";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::FoldCountExceedsRows: return "FoldCountExceedsRows";
        case ErrorCode::KExceedsSamples: return "KExceedsSamples";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::UnknownClusterColumn: return "UnknownClusterColumn";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteIntermediate: return "NonFiniteIntermediate";
        case ErrorCode::NotScalarRoot: return "NotScalarRoot";
        case ErrorCode::UnsupportedOpForSecondOrder: return "UnsupportedOpForSecondOrder";
        case ErrorCode::BatchNotPackable: return "BatchNotPackable";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::AcceptanceStalled: return "AcceptanceStalled";
        case ErrorCode::InvalidCondition: return "InvalidCondition";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyClassInTruth: return "EmptyClassInTruth";
        case ErrorCode::NotFitted: return "NotFitted";
        case ErrorCode::DivisionByZeroMetric: return "DivisionByZeroMetric";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::MissingCell: return "MissingCell";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace ctdgan
