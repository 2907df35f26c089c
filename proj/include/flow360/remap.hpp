#pragma once

#include <vector>

#include "flow360/exec.hpp"
#include "flow360/raster.hpp"

namespace flow360 {

/// Per-output-pixel source positions (pixel-index coordinates). Every warp in
/// the library is expressed as a SampleGrid followed by remap(), so images and
/// flow fields pushed through the same geometry see the same coordinates.
struct SampleGrid {
    int height = 0;
    int width = 0;
    std::vector<double> xs;
    std::vector<double> ys;

    SampleGrid() = default;
    SampleGrid(int h, int w);

    double& x(int row, int col) { return xs[static_cast<std::size_t>(row) * width + col]; }
    double& y(int row, int col) { return ys[static_cast<std::size_t>(row) * width + col]; }
    double x(int row, int col) const { return xs[static_cast<std::size_t>(row) * width + col]; }
    double y(int row, int col) const { return ys[static_cast<std::size_t>(row) * width + col]; }
};

/// Output has the grid's size and the source's channel count.
Image remap(const Image& src, const SampleGrid& grid, EdgePolicy policy,
            Interp interp = Interp::Bilinear, Exec exec = Exec::Parallel);

/// Interleaved float raster of any channel count; dst holds
/// grid.height * grid.width * channels values.
void remap_raw(const float* src, int height, int width, int channels, const SampleGrid& grid,
               EdgePolicy policy, Interp interp, Exec exec, float* dst);

/// Resamples u and v as independent scalar fields.
FlowField remap(const FlowField& src, const SampleGrid& grid, EdgePolicy policy,
                Interp interp = Interp::Bilinear, Exec exec = Exec::Parallel);

}  // namespace flow360
