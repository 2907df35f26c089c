#pragma once

#include <optional>

#include "flow360/raster.hpp"

namespace flow360 {

/// Color-wheel rendering of a flow field (hue = direction, saturation =
/// magnitude / max_magnitude, white at zero motion). Vectors longer than the
/// normalizer are drawn at 75% brightness. The wheel is the usual 55-entry
/// RY/YG/GC/CB/BM/MR tabulation; direction (+u, 0) maps to its first entry
/// (pure red).
///
/// max_magnitude defaults to the 99th-percentile vector length.
Image flow_to_color(const FlowField& flow, std::optional<float> max_magnitude = std::nullopt);

/// RGB in [0,1] of a single normalized vector (fx, fy) = flow / max_magnitude.
Pixel wheel_color(double fx, double fy);

}  // namespace flow360
