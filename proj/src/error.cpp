#include "flow360/error.hpp"

namespace flow360 {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::ZeroDimension: return "zero-dimension";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::AspectRatio: return "aspect-ratio";
        case ErrorCode::BadMagic: return "bad-magic";
        case ErrorCode::TruncatedFile: return "truncated-file";
        case ErrorCode::TrailingData: return "trailing-data";
        case ErrorCode::NonfiniteValues: return "nonfinite-values";
        case ErrorCode::UnsupportedFormat: return "unsupported-format";
        case ErrorCode::MalformedHeader: return "malformed-header";
        case ErrorCode::Io: return "io";
        case ErrorCode::EmptyMask: return "empty-mask";
        case ErrorCode::Divergence: return "divergence";
    }
    return "unknown";
}

}  // namespace flow360
