#pragma once

#include <optional>
#include <vector>

#include "flow360/exec.hpp"
#include "flow360/raster.hpp"

namespace flow360 {

/// paper: u scaled per row and v scaled per column, both by sin of the
/// pixel's angular position. geometric: only u is scaled (meridional spacing
/// is uniform on an equirectangular raster, so v needs no correction).
enum class CorrectionMode { Paper, Geometric };

struct CorrectionProfile {
    std::vector<double> row_scale;  // multiplies u, one entry per row
    std::vector<double> col_scale;  // multiplies v, one entry per column
    CorrectionMode mode = CorrectionMode::Paper;
};

/// row_scale[i] = sin(pi (i + 0.5) / h), the ratio of the circumference of the
/// latitude circle through row i to the equator's circumference.
CorrectionProfile correction_profile(int height, int width, CorrectionMode mode);

FlowField correct_flow(const FlowField& flow, const CorrectionProfile& profile);

struct AugmentOptions {
    /// Output height; width is always 2 * height. Defaults to the source height.
    std::optional<int> height;
    CorrectionMode correction = CorrectionMode::Paper;
    Interp interp = Interp::Bilinear;
    Exec exec = Exec::Parallel;
};

/// Nearest resize to 2:1, then project_omega.
Image augment_image(const Image& img, const AugmentOptions& opts = {});

/// Nearest resize to 2:1 (rescaling the vectors), correct_flow, then
/// project_omega with each component resampled as a scalar field.
FlowField augment_flow(const FlowField& flow, const AugmentOptions& opts = {});

}  // namespace flow360
