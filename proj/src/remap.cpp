#include "flow360/remap.hpp"

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"

namespace flow360 {

namespace {

// Serial reference: one pixel at a time, straight off the grid.
void remap_serial(const float* src, int sh, int sw, int channels, const SampleGrid& grid,
                  EdgePolicy policy, Interp interp, float* dst) {
    for (int i = 0; i < grid.height; ++i) {
        for (int j = 0; j < grid.width; ++j) {
            float* out = dst + (static_cast<std::size_t>(i) * grid.width + j) * channels;
            detail::sample(src, sh, sw, channels, grid.x(i, j), grid.y(i, j), policy, interp,
                           out);
        }
    }
}

void remap_parallel(const float* src, int sh, int sw, int channels, const SampleGrid& grid,
                    EdgePolicy policy, Interp interp, float* dst) {
    const int gw = grid.width;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < grid.height; ++i) {
        const double* xs = grid.xs.data() + static_cast<std::size_t>(i) * gw;
        const double* ys = grid.ys.data() + static_cast<std::size_t>(i) * gw;
        float* row = dst + static_cast<std::size_t>(i) * gw * channels;
        if (interp == Interp::Bilinear) {
            for (int j = 0; j < gw; ++j) {
                detail::sample_bilinear(src, sh, sw, channels, xs[j], ys[j], policy,
                                        row + static_cast<std::size_t>(j) * channels);
            }
        } else {
            for (int j = 0; j < gw; ++j) {
                detail::sample_nearest(src, sh, sw, channels, xs[j], ys[j], policy,
                                       row + static_cast<std::size_t>(j) * channels);
            }
        }
    }
}

void check_grid(const SampleGrid& grid) {
    if (grid.height < 1 || grid.width < 1) {
        throw Error(ErrorCode::ZeroDimension, "empty sample grid");
    }
}

}  // namespace

SampleGrid::SampleGrid(int h, int w) : height(h), width(w) {
    if (h < 1 || w < 1) throw Error(ErrorCode::ZeroDimension, "empty sample grid");
    xs.assign(static_cast<std::size_t>(h) * w, 0.0);
    ys.assign(static_cast<std::size_t>(h) * w, 0.0);
}

void remap_raw(const float* src, int height, int width, int channels, const SampleGrid& grid,
               EdgePolicy policy, Interp interp, Exec exec, float* dst) {
    check_grid(grid);
    if (exec == Exec::Serial) {
        remap_serial(src, height, width, channels, grid, policy, interp, dst);
    } else {
        remap_parallel(src, height, width, channels, grid, policy, interp, dst);
    }
}

Image remap(const Image& src, const SampleGrid& grid, EdgePolicy policy, Interp interp,
            Exec exec) {
    check_grid(grid);
    Image out(grid.height, grid.width, src.channels());
    if (exec == Exec::Serial) {
        remap_serial(src.data().data(), src.height(), src.width(), src.channels(), grid,
                     policy, interp, out.data().data());
    } else {
        remap_parallel(src.data().data(), src.height(), src.width(), src.channels(), grid,
                       policy, interp, out.data().data());
    }
    return out;
}

FlowField remap(const FlowField& src, const SampleGrid& grid, EdgePolicy policy,
                Interp interp, Exec exec) {
    check_grid(grid);
    FlowField out(grid.height, grid.width);
    if (exec == Exec::Serial) {
        remap_serial(src.data().data(), src.height(), src.width(), 2, grid, policy, interp,
                     out.data().data());
    } else {
        remap_parallel(src.data().data(), src.height(), src.width(), 2, grid, policy, interp,
                       out.data().data());
    }
    return out;
}

}  // namespace flow360
