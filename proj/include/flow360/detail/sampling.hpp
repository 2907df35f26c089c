#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "flow360/raster.hpp"

namespace flow360::detail {

// Largest magnitude accepted as a sampling coordinate; beyond it everything
// resolves to the same border pixels anyway.
inline constexpr double kCoordLimit = 1.0e9;

inline double sanitize_coord(double c) {
    if (!std::isfinite(c)) return 0.0;
    return std::clamp(c, -kCoordLimit, kCoordLimit);
}

/// Maps a (possibly out-of-range) integer pixel index onto the raster.
inline void resolve_index(long long& yi, long long& xi, int height, int width,
                          EdgePolicy policy) {
    if (policy.vertical == VerticalEdge::ReflectShift) {
        if (yi < 0) {
            yi = std::min<long long>(-yi - 1, height - 1);
            xi += width / 2;
        } else if (yi >= height) {
            yi = std::max<long long>(2LL * height - 1 - yi, 0);
            xi += width / 2;
        }
    } else {
        yi = std::clamp<long long>(yi, 0, height - 1);
    }
    if (policy.horizontal == HorizontalEdge::Wrap) {
        xi %= width;
        if (xi < 0) xi += width;
    } else {
        xi = std::clamp<long long>(xi, 0, width - 1);
    }
}

/// Bilinear sample of an interleaved H x W x C float buffer; writes C values.
inline void sample_bilinear(const float* data, int height, int width, int channels,
                            double x, double y, EdgePolicy policy, float* out) {
    x = sanitize_coord(x);
    y = sanitize_coord(y);
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double ax = x - fx;
    const double ay = y - fy;
    const auto x0 = static_cast<long long>(fx);
    const auto y0 = static_cast<long long>(fy);

    long long r[4] = {y0, y0, y0 + 1, y0 + 1};
    long long c[4] = {x0, x0 + 1, x0, x0 + 1};
    const float* p[4];
    for (int k = 0; k < 4; ++k) {
        resolve_index(r[k], c[k], height, width, policy);
        p[k] = data + (static_cast<std::size_t>(r[k]) * width + c[k]) * channels;
    }
    for (int ch = 0; ch < channels; ++ch) {
        const double p00 = p[0][ch];
        const double p01 = p[1][ch];
        const double p10 = p[2][ch];
        const double p11 = p[3][ch];
        const double top = p00 + ax * (p01 - p00);
        const double bottom = p10 + ax * (p11 - p10);
        out[ch] = static_cast<float>(top + ay * (bottom - top));
    }
}

inline void sample_nearest(const float* data, int height, int width, int channels,
                           double x, double y, EdgePolicy policy, float* out) {
    x = sanitize_coord(x);
    y = sanitize_coord(y);
    auto xi = static_cast<long long>(std::floor(x + 0.5));
    auto yi = static_cast<long long>(std::floor(y + 0.5));
    resolve_index(yi, xi, height, width, policy);
    const float* p = data + (static_cast<std::size_t>(yi) * width + xi) * channels;
    std::copy(p, p + channels, out);
}

inline void sample(const float* data, int height, int width, int channels, double x,
                   double y, EdgePolicy policy, Interp interp, float* out) {
    if (interp == Interp::Nearest) {
        sample_nearest(data, height, width, channels, x, y, policy, out);
    } else {
        sample_bilinear(data, height, width, channels, x, y, policy, out);
    }
}

/// Coordinates produced by trigonometry land a few ulps off integer pixel
/// positions; pulling them onto the grid keeps pure shifts exact.
inline constexpr double kSnapTolerance = 1.0e-7;

inline double snap_to_grid(double c) {
    const double r = std::nearbyint(c);
    return std::abs(c - r) <= kSnapTolerance ? r : c;
}

}  // namespace flow360::detail

namespace flow360::detail {

/// Reduces d modulo period into (-period/2, period/2].
inline double wrap_periodic(double d, double period) {
    d = std::fmod(d, period);
    const double half = 0.5 * period;
    if (d <= -half) d += period;
    if (d > half) d -= period;
    return d;
}

}  // namespace flow360::detail
