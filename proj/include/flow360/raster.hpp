#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "flow360/exec.hpp"

namespace flow360 {

// Coordinate conventions used across the library:
//
//  * Sampling coordinates are pixel-index based: pixel (row i, col j) sits at
//    continuous position (x = j, y = i).
//  * Normalized coordinates (u, v) in [0,1] place pixel (i, j) at
//    u = (j + 0.5) / width, v = (i + 0.5) / height.
//  * Flow follows the Middlebury convention: u is horizontal displacement
//    (positive rightward), v is vertical displacement (positive downward),
//    both in pixels of the raster the flow belongs to.

inline constexpr int kMaxImageChannels = 3;

/// H x W x C raster of normalized intensities (row-major, interleaved).
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, float fill = 0.0f);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }

    float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// H x W field of (u, v) displacements in pixels.
class FlowField {
public:
    FlowField() = default;
    FlowField(int height, int width, float u = 0.0f, float v = 0.0f);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool empty() const noexcept { return data_.empty(); }

    float& u(int y, int x) { return data_[index(y, x)]; }
    float u(int y, int x) const { return data_[index(y, x)]; }
    float& v(int y, int x) { return data_[index(y, x) + 1]; }
    float v(int y, int x) const { return data_[index(y, x) + 1]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool same_shape(const FlowField& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool operator==(const FlowField&) const = default;

private:
    std::size_t index(int y, int x) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * 2;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

enum class HorizontalEdge { Wrap, Clamp };

/// ReflectShift folds a row index across the pole (y < 0 -> -y - 1) and moves
/// the column by width / 2, which is where that pixel lands on the sphere.
enum class VerticalEdge { ReflectShift, Clamp };

struct EdgePolicy {
    HorizontalEdge horizontal = HorizontalEdge::Wrap;
    VerticalEdge vertical = VerticalEdge::Clamp;

    bool operator==(const EdgePolicy&) const = default;
};

enum class Interp { Bilinear, Nearest };

using Pixel = std::array<float, kMaxImageChannels>;

/// Bilinear blend of the four neighbours of (x, y), in pixel-index
/// coordinates, after resolving out-of-range neighbours with `policy`.
/// Channels beyond img.channels() are zero.
Pixel bilinear_sample(const Image& img, double x, double y, EdgePolicy policy);

Image resize_nearest(const Image& src, int out_height, int out_width);

/// Nearest resize that also rescales (u, v) by (out_w / w, out_h / h), so the
/// displacements stay in output-pixel units.
FlowField resize_nearest(const FlowField& src, int out_height, int out_width);

}  // namespace flow360
