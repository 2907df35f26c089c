#include "flow360/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flow360/error.hpp"
#include "flow360/sphere.hpp"

namespace flow360 {

namespace {

// sin(pi (k + 0.5) / n), taken from the nearer edge so the profile is exactly
// symmetric.
double centred_sine(int k, int n) {
    return std::sin(std::numbers::pi * std::min(k + 0.5, n - k - 0.5) / n);
}

int output_height(int source_height, const AugmentOptions& opts) {
    const int h = opts.height.value_or(source_height);
    if (h < 1) throw Error(ErrorCode::ZeroDimension, "augmentation height must be >= 1");
    return h;
}

}  // namespace

CorrectionProfile correction_profile(int height, int width, CorrectionMode mode) {
    if (height < 1 || width < 1) {
        throw Error(ErrorCode::ZeroDimension, "correction profile needs h, w >= 1");
    }
    CorrectionProfile p;
    p.mode = mode;
    p.row_scale.resize(static_cast<std::size_t>(height));
    for (int i = 0; i < height; ++i) {
        p.row_scale[i] = centred_sine(i, height);
    }
    p.col_scale.assign(static_cast<std::size_t>(width), 1.0);
    if (mode == CorrectionMode::Paper) {
        for (int j = 0; j < width; ++j) {
            p.col_scale[j] = centred_sine(j, width);
        }
    }
    return p;
}

FlowField correct_flow(const FlowField& flow, const CorrectionProfile& profile) {
    if (profile.row_scale.size() != static_cast<std::size_t>(flow.height()) ||
        profile.col_scale.size() != static_cast<std::size_t>(flow.width())) {
        throw Error(ErrorCode::DimensionMismatch, "correction profile does not match flow size");
    }
    FlowField out(flow.height(), flow.width());
    for (int i = 0; i < flow.height(); ++i) {
        for (int j = 0; j < flow.width(); ++j) {
            out.u(i, j) = static_cast<float>(flow.u(i, j) * profile.row_scale[i]);
            out.v(i, j) = static_cast<float>(flow.v(i, j) * profile.col_scale[j]);
        }
    }
    return out;
}

Image augment_image(const Image& img, const AugmentOptions& opts) {
    const int h = output_height(img.height(), opts);
    return project_omega(resize_nearest(img, h, 2 * h), opts.interp, opts.exec);
}

FlowField augment_flow(const FlowField& flow, const AugmentOptions& opts) {
    const int h = output_height(flow.height(), opts);
    const FlowField resized = resize_nearest(flow, h, 2 * h);
    const FlowField corrected = correct_flow(resized, correction_profile(h, 2 * h, opts.correction));
    return project_omega(corrected, opts.interp, opts.exec);
}

}  // namespace flow360
