#include "flow360/warp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"

namespace flow360 {

namespace {

constexpr EdgePolicy kWarpPolicy{HorizontalEdge::Wrap, VerticalEdge::Clamp};

template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* what) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": " + std::to_string(a.height()) + "x" +
                        std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                        std::to_string(b.width()));
    }
}

double sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

// Boundary-resolved target of pixel (i, j), in degrees.
std::pair<double, double> resolved_target(const FlowField& flow, int i, int j) {
    const int h = flow.height();
    const int w = flow.width();
    const double du = detail::wrap_periodic(flow.u(i, j), w);
    const double dv = std::clamp<double>(flow.v(i, j), -h, h);
    return resolve_boundary(grid_lon(j, w) + du * 360.0 / w, grid_lat(i, h) + dv * 180.0 / h);
}

void fill_sample_row(const FlowField& flow, int i, SampleGrid& grid) {
    const int h = flow.height();
    const int w = flow.width();
    for (int j = 0; j < w; ++j) {
        const auto [lon, lat] = resolved_target(flow, i, j);
        grid.x(i, j) = detail::snap_to_grid((lon + 180.0) / 360.0 * w - 0.5);
        grid.y(i, j) = detail::snap_to_grid((lat + 90.0) / 180.0 * h - 0.5);
    }
}

}  // namespace

DegreeGrid::DegreeGrid(int h, int w) : height(h), width(w) {
    if (h < 1 || w < 1) throw Error(ErrorCode::ZeroDimension, "empty degree grid");
    lon.assign(static_cast<std::size_t>(h) * w, 0.0);
    lat.assign(static_cast<std::size_t>(h) * w, 0.0);
}

double grid_lon(int col, int width) { return -180.0 + (col + 0.5) * 360.0 / width; }
double grid_lat(int row, int height) { return -90.0 + (row + 0.5) * 180.0 / height; }

DegreeGrid flow_to_degrees(const FlowField& flow) {
    DegreeGrid g(flow.height(), flow.width());
    for (int i = 0; i < flow.height(); ++i) {
        for (int j = 0; j < flow.width(); ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * flow.width() + j;
            g.lon[k] = static_cast<double>(flow.u(i, j)) * 360.0 / flow.width();
            g.lat[k] = static_cast<double>(flow.v(i, j)) * 180.0 / flow.height();
        }
    }
    return g;
}

std::pair<double, double> resolve_boundary(double lon, double lat) {
    if (lon < -180.0 || lon > 180.0) lon = sign(lon) * (std::abs(lon) - 360.0);
    if (lat < -90.0 || lat > 90.0) {
        lat = sign(lat) * (180.0 - std::abs(lat));
        lon = -lon;
    }
    return {lon, lat};
}

DegreeGrid wrap_target_grid(const FlowField& flow) {
    DegreeGrid g(flow.height(), flow.width());
    for (int i = 0; i < flow.height(); ++i) {
        for (int j = 0; j < flow.width(); ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * flow.width() + j;
            std::tie(g.lon[k], g.lat[k]) = resolved_target(flow, i, j);
        }
    }
    return g;
}

SampleGrid warp_sample_grid(const FlowField& flow, Exec exec) {
    SampleGrid grid(flow.height(), flow.width());
    if (exec == Exec::Serial) {
        for (int i = 0; i < flow.height(); ++i) fill_sample_row(flow, i, grid);
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < flow.height(); ++i) fill_sample_row(flow, i, grid);
    }
    return grid;
}

Image backward_warp(const Image& img, const FlowField& flow, Exec exec) {
    require_same_dims(img, flow, "backward_warp");
    return remap(img, warp_sample_grid(flow, exec), kWarpPolicy, Interp::Bilinear, exec);
}

FlowField backward_warp(const FlowField& field, const FlowField& flow, Exec exec) {
    require_same_dims(field, flow, "backward_warp");
    return remap(field, warp_sample_grid(flow, exec), kWarpPolicy, Interp::Bilinear, exec);
}

OcclusionMask::OcclusionMask(int height, int width, std::uint8_t fill)
    : height_(height), width_(width) {
    if (height < 1 || width < 1) throw Error(ErrorCode::ZeroDimension, "empty mask");
    data_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t OcclusionMask::count_ones() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

OcclusionMask motion_mask(const FlowField& flow, double eps) {
    if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be >= 0");
    OcclusionMask m(flow.height(), flow.width());
    for (int i = 0; i < flow.height(); ++i) {
        for (int j = 0; j < flow.width(); ++j) {
            m.at(i, j) = std::hypot<double>(flow.u(i, j), flow.v(i, j)) <= eps ? 1 : 0;
        }
    }
    return m;
}

OcclusionPair occlusion_masks(const FlowField& flow_fw, const FlowField& flow_bw, double eps,
                              OcclusionMode mode) {
    require_same_dims(flow_fw, flow_bw, "occlusion_masks");
    if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be >= 0");
    const int h = flow_fw.height();
    const int w = flow_fw.width();
    OcclusionPair out{OcclusionMask(h, w), OcclusionMask(h, w)};

    if (mode == OcclusionMode::Literal) {
        const OcclusionMask m1 = motion_mask(flow_fw, eps);
        const OcclusionMask m2 = motion_mask(flow_bw, eps);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                out.forward.at(i, j) = m1.at(i, j) & (1 - m2.at(i, j));
                out.backward.at(i, j) = m2.at(i, j) & (1 - m1.at(i, j));
            }
        }
        return out;
    }

    const FlowField bw_at_fw = backward_warp(flow_bw, flow_fw);
    const FlowField fw_at_bw = backward_warp(flow_fw, flow_bw);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double fu = detail::wrap_periodic(
                static_cast<double>(flow_fw.u(i, j)) + bw_at_fw.u(i, j), w);
            const double fv = static_cast<double>(flow_fw.v(i, j)) + bw_at_fw.v(i, j);
            const double bu = detail::wrap_periodic(
                static_cast<double>(flow_bw.u(i, j)) + fw_at_bw.u(i, j), w);
            const double bv = static_cast<double>(flow_bw.v(i, j)) + fw_at_bw.v(i, j);
            out.forward.at(i, j) = std::hypot(fu, fv) > eps ? 1 : 0;
            out.backward.at(i, j) = std::hypot(bu, bv) > eps ? 1 : 0;
        }
    }
    return out;
}

double robust_penalty(double x, double eps, double q) { return std::pow(std::abs(x) + eps, q); }

PhotometricLoss photometric_loss_terms(const Image& i1, const Image& i2, const Image& i1_pred,
                                       const Image& i2_pred, const OcclusionMask& o_fw,
                                       const OcclusionMask& o_bw, double eps, double q) {
    if (!i1.same_shape(i2) || !i1.same_shape(i1_pred) || !i1.same_shape(i2_pred)) {
        throw Error(ErrorCode::DimensionMismatch, "photometric_loss: image shapes differ");
    }
    require_same_dims(i1, o_fw, "photometric_loss");
    require_same_dims(i1, o_bw, "photometric_loss");

    auto direction = [&](const Image& frame, const Image& pred, const OcclusionMask& occ) {
        double num = 0.0;
        double den = 0.0;
        const int channels = frame.channels();
        for (int y = 0; y < frame.height(); ++y) {
            for (int x = 0; x < frame.width(); ++x) {
                if (occ.at(y, x)) continue;
                double pen = 0.0;
                for (int c = 0; c < channels; ++c) {
                    pen += robust_penalty(static_cast<double>(frame.at(y, x, c)) - pred.at(y, x, c),
                                          eps, q);
                }
                num += pen / channels;
                den += 1.0;
            }
        }
        return den > 0.0 ? num / den : 0.0;
    };
    return {direction(i1, i1_pred, o_fw), direction(i2, i2_pred, o_bw)};
}

double photometric_loss(const Image& i1, const Image& i2, const Image& i1_pred,
                        const Image& i2_pred, const OcclusionMask& o_fw,
                        const OcclusionMask& o_bw, double eps, double q) {
    return photometric_loss_terms(i1, i2, i1_pred, i2_pred, o_fw, o_bw, eps, q).total();
}

int pole_rows(int height, double pole_fraction) {
    return static_cast<int>(std::floor(std::clamp(pole_fraction, 0.0, 0.5) * height));
}

double brightness_error(const Image& i1, const FlowField& flow_fw, const Image& i2,
                        double pole_fraction) {
    if (!i1.same_shape(i2)) throw Error(ErrorCode::DimensionMismatch, "brightness_error: image shapes differ");
    const Image warped = backward_warp(i2, flow_fw);
    const int skip = pole_rows(i1.height(), pole_fraction);
    double sum = 0.0;
    long long n = 0;
    for (int y = skip; y < i1.height() - skip; ++y) {
        for (int x = 0; x < i1.width(); ++x) {
            for (int c = 0; c < i1.channels(); ++c) {
                const double d = static_cast<double>(warped.at(y, x, c)) - i1.at(y, x, c);
                sum += d * d;
                ++n;
            }
        }
    }
    return n > 0 ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

}  // namespace flow360
