#include "flow360/colorize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace flow360 {

namespace {

// Relative lengths of the hue transitions (red-yellow, yellow-green, ...);
// more entries where the eye separates more shades.
constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
constexpr int kWheelSize = kRY + kYG + kGC + kCB + kBM + kMR;

using Wheel = std::array<std::array<int, 3>, kWheelSize>;

constexpr Wheel make_wheel() {
    Wheel w{};
    int k = 0;
    for (int i = 0; i < kRY; ++i) w[k++] = {255, 255 * i / kRY, 0};
    for (int i = 0; i < kYG; ++i) w[k++] = {255 - 255 * i / kYG, 255, 0};
    for (int i = 0; i < kGC; ++i) w[k++] = {0, 255, 255 * i / kGC};
    for (int i = 0; i < kCB; ++i) w[k++] = {0, 255 - 255 * i / kCB, 255};
    for (int i = 0; i < kBM; ++i) w[k++] = {255 * i / kBM, 0, 255};
    for (int i = 0; i < kMR; ++i) w[k++] = {255, 0, 255 - 255 * i / kMR};
    return w;
}

constexpr Wheel kWheel = make_wheel();

float percentile_magnitude(const FlowField& flow, double q) {
    std::vector<float> mags;
    mags.reserve(static_cast<std::size_t>(flow.height()) * flow.width());
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            mags.push_back(static_cast<float>(std::hypot(flow.u(y, x), flow.v(y, x))));
        }
    }
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(mags.size() - 1)));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    return mags[k];
}

}  // namespace

Pixel wheel_color(double fx, double fy) {
    const double rad = std::sqrt(fx * fx + fy * fy);
    double a = std::atan2(-fy, -fx) / std::numbers::pi;
    // Both signs of zero on the -x ray land on the first wheel entry.
    if (a >= 1.0) a = -1.0;
    const double fk = (a + 1.0) / 2.0 * (kWheelSize - 1);
    const int k0 = std::clamp(static_cast<int>(fk), 0, kWheelSize - 1);
    const int k1 = (k0 + 1) % kWheelSize;
    const double f = fk - k0;

    Pixel out{};
    for (int b = 0; b < 3; ++b) {
        const double col0 = kWheel[k0][b] / 255.0;
        const double col1 = kWheel[k1][b] / 255.0;
        double col = (1.0 - f) * col0 + f * col1;
        if (rad <= 1.0) {
            col = 1.0 - rad * (1.0 - col);
        } else {
            col *= 0.75;
        }
        out[b] = static_cast<float>(col);
    }
    return out;
}

Image flow_to_color(const FlowField& flow, std::optional<float> max_magnitude) {
    float norm = max_magnitude ? *max_magnitude : percentile_magnitude(flow, 0.99);
    if (!(norm > 0.0f) || !std::isfinite(norm)) norm = 1.0f;

    Image out(flow.height(), flow.width(), 3);
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            const Pixel c = wheel_color(static_cast<double>(flow.u(y, x)) / norm,
                                        static_cast<double>(flow.v(y, x)) / norm);
            for (int b = 0; b < 3; ++b) out.at(y, x, b) = c[b];
        }
    }
    return out;
}

}  // namespace flow360
