#include "flow360/raster.hpp"

#include <string>

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"

namespace flow360 {

namespace {

void require_dims(int height, int width) {
    if (height < 1 || width < 1) {
        throw Error(ErrorCode::ZeroDimension, "raster dimensions must be >= 1, got " +
                                                  std::to_string(height) + "x" +
                                                  std::to_string(width));
    }
}

// Source index of output index i for a nearest resize from n to out_n,
// floor((i + 0.5) * n / out_n) evaluated in integers.
int nearest_index(int i, int n, int out_n) {
    return static_cast<int>(((2LL * i + 1) * n) / (2LL * out_n));
}

}  // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    require_dims(height, width);
    if (channels != 1 && channels != 3) {
        throw Error(ErrorCode::InvalidArgument,
                    "image channels must be 1 or 3, got " + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

FlowField::FlowField(int height, int width, float u, float v)
    : height_(height), width_(width) {
    require_dims(height, width);
    data_.resize(static_cast<std::size_t>(height) * width * 2);
    for (std::size_t i = 0; i < data_.size(); i += 2) {
        data_[i] = u;
        data_[i + 1] = v;
    }
}

Pixel bilinear_sample(const Image& img, double x, double y, EdgePolicy policy) {
    Pixel out{};
    detail::sample_bilinear(img.data().data(), img.height(), img.width(), img.channels(), x,
                            y, policy, out.data());
    return out;
}

Image resize_nearest(const Image& src, int out_height, int out_width) {
    require_dims(out_height, out_width);
    Image out(out_height, out_width, src.channels());
    for (int i = 0; i < out_height; ++i) {
        const int si = nearest_index(i, src.height(), out_height);
        for (int j = 0; j < out_width; ++j) {
            const int sj = nearest_index(j, src.width(), out_width);
            for (int c = 0; c < src.channels(); ++c) out.at(i, j, c) = src.at(si, sj, c);
        }
    }
    return out;
}

FlowField resize_nearest(const FlowField& src, int out_height, int out_width) {
    require_dims(out_height, out_width);
    FlowField out(out_height, out_width);
    const bool same = out_height == src.height() && out_width == src.width();
    const double su = static_cast<double>(out_width) / src.width();
    const double sv = static_cast<double>(out_height) / src.height();
    for (int i = 0; i < out_height; ++i) {
        const int si = nearest_index(i, src.height(), out_height);
        for (int j = 0; j < out_width; ++j) {
            const int sj = nearest_index(j, src.width(), out_width);
            if (same) {
                out.u(i, j) = src.u(si, sj);
                out.v(i, j) = src.v(si, sj);
            } else {
                out.u(i, j) = static_cast<float>(src.u(si, sj) * su);
                out.v(i, j) = static_cast<float>(src.v(si, sj) * sv);
            }
        }
    }
    return out;
}

}  // namespace flow360
