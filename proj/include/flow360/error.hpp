#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flow360 {

enum class ErrorCode {
    InvalidArgument,
    ZeroDimension,
    DimensionMismatch,
    AspectRatio,
    BadMagic,
    TruncatedFile,
    TrailingData,
    NonfiniteValues,
    UnsupportedFormat,
    MalformedHeader,
    Io,
    EmptyMask,
    Divergence,
};

/// Stable kebab-case identifier, used in CLI error lines.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace flow360
