#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flow360/exec.hpp"
#include "flow360/raster.hpp"
#include "flow360/remap.hpp"

namespace flow360 {

// Degree grid: lon spans [-180, 180] across the columns and lat spans
// [-90, 90] down the rows (lat grows with the row index, matching v > 0 =
// downward). Pixel (i, j) sits at lon = -180 + (j + 0.5) * 360 / w,
// lat = -90 + (i + 0.5) * 180 / h.

struct DegreeGrid {
    int height = 0;
    int width = 0;
    std::vector<double> lon;
    std::vector<double> lat;

    DegreeGrid() = default;
    DegreeGrid(int h, int w);
};

double grid_lon(int col, int width);
double grid_lat(int row, int height);

/// (dlon, dlat) = (u * 360 / w, v * 180 / h) per pixel.
DegreeGrid flow_to_degrees(const FlowField& flow);

/// Boundary resolution of a single target (lon, lat) in degrees: out-of-range
/// lon becomes sign(lon) * (|lon| - 360); out-of-range lat becomes
/// sign(lat) * (180 - |lat|) and lon is negated.
std::pair<double, double> resolve_boundary(double lon, double lat);

/// Grid + flow, boundary-resolved. Horizontal flow is first reduced modulo w
/// (exact, in pixel units) and vertical flow clamped to +-h so one
/// resolution step always lands inside the valid range.
DegreeGrid wrap_target_grid(const FlowField& flow);

/// Pixel-index sampling positions for the resolved targets.
SampleGrid warp_sample_grid(const FlowField& flow, Exec exec = Exec::Parallel);

/// output(p) = input sampled at the boundary-resolved target of p.
Image backward_warp(const Image& img, const FlowField& flow, Exec exec = Exec::Parallel);
FlowField backward_warp(const FlowField& field, const FlowField& flow,
                        Exec exec = Exec::Parallel);

/// Binary H x W mask.
class OcclusionMask {
public:
    OcclusionMask() = default;
    OcclusionMask(int height, int width, std::uint8_t fill = 0);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<std::uint8_t> data() noexcept { return data_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::size_t count_ones() const noexcept;

    bool operator==(const OcclusionMask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

/// 1 where |flow| <= eps (Euclidean norm of (u, v)).
OcclusionMask motion_mask(const FlowField& flow, double eps);

enum class OcclusionMode {
    /// Motion masks combined through the mutual recursion
    /// O_fw = M1 (1 - M2 + O_bw), O_bw = M2 (1 - M1 + O_fw); its fixed point
    /// from zero is O_fw = M1 (1 - M2), O_bw = M2 (1 - M1).
    Literal,
    /// Forward-backward consistency: occluded where
    /// |flow_fw(p) + flow_bw(p + flow_fw(p))| > eps (and symmetrically).
    FbConsistency,
};

struct OcclusionPair {
    OcclusionMask forward;
    OcclusionMask backward;
};

OcclusionPair occlusion_masks(const FlowField& flow_fw, const FlowField& flow_bw, double eps,
                              OcclusionMode mode = OcclusionMode::Literal);

/// (|x| + eps)^q.
double robust_penalty(double x, double eps, double q);

struct PhotometricLoss {
    double forward = 0.0;   // frame 1 term, masked by O_fw
    double backward = 0.0;  // frame 2 term, masked by O_bw
    double total() const { return forward + backward; }
};

/// Per direction: sum over pixels of the channel-mean penalty on
/// (I - I_pred), masked by (1 - O), divided by sum(1 - O). A direction whose
/// pixels are all occluded contributes 0.
PhotometricLoss photometric_loss_terms(const Image& i1, const Image& i2, const Image& i1_pred,
                                       const Image& i2_pred, const OcclusionMask& o_fw,
                                       const OcclusionMask& o_bw, double eps = 1e-2,
                                       double q = 0.1);

double photometric_loss(const Image& i1, const Image& i2, const Image& i1_pred,
                        const Image& i2_pred, const OcclusionMask& o_fw,
                        const OcclusionMask& o_bw, double eps = 1e-2, double q = 0.1);

/// RMS over pixels and channels of backward_warp(i2, flow_fw) - i1. The
/// given fraction of rows nearest each pole can be left out.
double brightness_error(const Image& i1, const FlowField& flow_fw, const Image& i2,
                        double pole_fraction = 0.0);

/// Number of rows at each pole dropped by a pole fraction: floor(f * h).
int pole_rows(int height, double pole_fraction);

}  // namespace flow360
