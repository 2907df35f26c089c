#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "flow360/exec.hpp"
#include "flow360/raster.hpp"
#include "flow360/remap.hpp"

namespace flow360 {

/// theta is the polar angle in [0, pi] (0 = north pole, top of the
/// equirectangular raster); phi the azimuth in [0, 2pi).
struct SphericalCoord {
    double theta = 0.0;
    double phi = 0.0;
};

/// Proper rotation of the unit sphere. Axes: z is the polar axis, so yaw
/// (about z) shifts longitude uniformly; pitch turns about y, roll about x.
class SphereRotation {
public:
    SphereRotation() : m_(Eigen::Matrix3d::Identity()) {}

    /// R = Rz(yaw) * Ry(pitch) * Rx(roll), angles in degrees.
    static SphereRotation from_ypr_degrees(double yaw, double pitch, double roll);

    /// Throws Error{InvalidArgument} unless R^T R = I and det R = 1 within 1e-6.
    static SphereRotation from_matrix(const Eigen::Matrix3d& m);

    const Eigen::Matrix3d& matrix() const noexcept { return m_; }
    Eigen::Vector3d apply(const Eigen::Vector3d& d) const { return m_ * d; }
    SphereRotation inverse() const;

    /// (a * b) applies b first.
    friend SphereRotation operator*(const SphereRotation& a, const SphereRotation& b);

private:
    explicit SphereRotation(const Eigen::Matrix3d& m) : m_(m) {}
    Eigen::Matrix3d m_;
};

/// Perspective-plane to sphere: phi = 2 pi u, cos(theta) = 2 v - 1.
SphericalCoord forward_map(double u, double v);

/// Standard equirectangular: theta = pi v, phi = 2 pi u.
SphericalCoord equirect_map(double u, double v);

Eigen::Vector3d to_unit_vector(SphericalCoord s);
SphericalCoord from_unit_vector(const Eigen::Vector3d& d);

/// Direction through the centre of pixel (row, col) of an h x w panorama.
Eigen::Vector3d pixel_direction(int row, int col, int height, int width);

/// Pixel-index position (x, y) of a direction on an h x w panorama;
/// x in [-0.5, w - 0.5), y in [-0.5, h - 0.5].
Eigen::Vector2d direction_to_pixel(const Eigen::Vector3d& d, int height, int width);

/// Source position of output pixel (row, col) under the composite
/// back-projection of the perspective-to-sphere map: the source keeps u and
/// samples v = (1 - cos(pi v')) / 2, i.e. forward_map read with the image's
/// downward v axis so the top of the input stays at the top of the panorama.
double omega_source_v(double v_out);

SampleGrid omega_grid(int height, int width);

/// Single-pass ω(Ω(·)). Requires width == 2 * height (Error{AspectRatio}).
/// Sampling uses horizontal wrap and vertical clamp.
Image project_omega(const Image& img, Interp interp = Interp::Bilinear,
                    Exec exec = Exec::Parallel);
FlowField project_omega(const FlowField& flow, Interp interp = Interp::Bilinear,
                        Exec exec = Exec::Parallel);

/// Each output pixel samples the input at R^-1 applied to its direction, so
/// content at direction d moves to R d. Requires a 2:1 raster.
SampleGrid rotation_grid(const SphereRotation& rot, int height, int width);
Image rotate_equirect(const Image& img, const SphereRotation& rot,
                      Interp interp = Interp::Bilinear, Exec exec = Exec::Parallel);

/// Ground-truth flow of rotate_equirect: per pixel, the displacement from its
/// own position to the position of its rotated direction, with the horizontal
/// component reduced into (-w/2, w/2].
FlowField rotation_flow(const SphereRotation& rot, int height, int width);

/// Smooth, seam- and pole-continuous test texture: a sum of a few random
/// plane waves evaluated on the unit sphere, values in [0.05, 0.95].
Image sphere_texture(int height, int width, int channels, std::uint64_t seed);

}  // namespace flow360
