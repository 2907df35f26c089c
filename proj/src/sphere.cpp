#include "flow360/sphere.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"

namespace flow360 {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_azimuth(double phi) {
    phi = std::fmod(phi, kTwoPi);
    if (phi < 0.0) phi += kTwoPi;
    if (phi >= kTwoPi) phi = 0.0;
    return phi;
}

void require_two_to_one(int height, int width) {
    if (width != 2 * height) {
        throw Error(ErrorCode::AspectRatio, "equirectangular raster must be 2:1, got " +
                                                std::to_string(height) + "x" +
                                                std::to_string(width));
    }
}

constexpr EdgePolicy kProjectionPolicy{HorizontalEdge::Wrap, VerticalEdge::Clamp};
constexpr EdgePolicy kSpherePolicy{HorizontalEdge::Wrap, VerticalEdge::ReflectShift};

}  // namespace

SphereRotation SphereRotation::from_ypr_degrees(double yaw, double pitch, double roll) {
    const double deg = kPi / 180.0;
    const Eigen::Matrix3d m = (Eigen::AngleAxisd(yaw * deg, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(pitch * deg, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(roll * deg, Eigen::Vector3d::UnitX()))
                                  .toRotationMatrix();
    return SphereRotation(m);
}

SphereRotation SphereRotation::from_matrix(const Eigen::Matrix3d& m) {
    if (!m.allFinite() || !(m.transpose() * m).isApprox(Eigen::Matrix3d::Identity(), 1e-6) ||
        std::abs(m.determinant() - 1.0) > 1e-6) {
        throw Error(ErrorCode::InvalidArgument, "rotation matrix must be orthonormal with det +1");
    }
    return SphereRotation(m);
}

SphereRotation SphereRotation::inverse() const { return SphereRotation(m_.transpose()); }

SphereRotation operator*(const SphereRotation& a, const SphereRotation& b) {
    return SphereRotation(a.m_ * b.m_);
}

SphericalCoord forward_map(double u, double v) {
    return {std::acos(std::clamp(2.0 * v - 1.0, -1.0, 1.0)), wrap_azimuth(kTwoPi * u)};
}

SphericalCoord equirect_map(double u, double v) {
    return {kPi * std::clamp(v, 0.0, 1.0), wrap_azimuth(kTwoPi * u)};
}

Eigen::Vector3d to_unit_vector(SphericalCoord s) {
    const double st = std::sin(s.theta);
    return {st * std::cos(s.phi), st * std::sin(s.phi), std::cos(s.theta)};
}

SphericalCoord from_unit_vector(const Eigen::Vector3d& d) {
    return {std::atan2(std::hypot(d.x(), d.y()), d.z()), wrap_azimuth(std::atan2(d.y(), d.x()))};
}

Eigen::Vector3d pixel_direction(int row, int col, int height, int width) {
    return to_unit_vector(equirect_map((col + 0.5) / width, (row + 0.5) / height));
}

Eigen::Vector2d direction_to_pixel(const Eigen::Vector3d& d, int height, int width) {
    const SphericalCoord s = from_unit_vector(d);
    return {s.phi / kTwoPi * width - 0.5, s.theta / kPi * height - 0.5};
}

double omega_source_v(double v_out) { return 0.5 * (1.0 - std::cos(kPi * v_out)); }

SampleGrid omega_grid(int height, int width) {
    SampleGrid grid(height, width);
    for (int i = 0; i < height; ++i) {
        const double v = omega_source_v((i + 0.5) / height);
        const double y = detail::snap_to_grid(v * height - 0.5);
        for (int j = 0; j < width; ++j) {
            grid.x(i, j) = j;
            grid.y(i, j) = y;
        }
    }
    return grid;
}

Image project_omega(const Image& img, Interp interp, Exec exec) {
    require_two_to_one(img.height(), img.width());
    return remap(img, omega_grid(img.height(), img.width()), kProjectionPolicy, interp, exec);
}

FlowField project_omega(const FlowField& flow, Interp interp, Exec exec) {
    require_two_to_one(flow.height(), flow.width());
    return remap(flow, omega_grid(flow.height(), flow.width()), kProjectionPolicy, interp, exec);
}

SampleGrid rotation_grid(const SphereRotation& rot, int height, int width) {
    SampleGrid grid(height, width);
    const Eigen::Matrix3d inv = rot.inverse().matrix();
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const Eigen::Vector2d p =
                direction_to_pixel(inv * pixel_direction(i, j, height, width), height, width);
            grid.x(i, j) = detail::snap_to_grid(p.x());
            grid.y(i, j) = detail::snap_to_grid(p.y());
        }
    }
    return grid;
}

Image rotate_equirect(const Image& img, const SphereRotation& rot, Interp interp, Exec exec) {
    require_two_to_one(img.height(), img.width());
    return remap(img, rotation_grid(rot, img.height(), img.width()), kSpherePolicy, interp, exec);
}

FlowField rotation_flow(const SphereRotation& rot, int height, int width) {
    FlowField flow(height, width);
    const Eigen::Matrix3d& m = rot.matrix();
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const Eigen::Vector2d p =
                direction_to_pixel(m * pixel_direction(i, j, height, width), height, width);
            const double du = detail::wrap_periodic(p.x() - j, width);
            flow.u(i, j) = static_cast<float>(detail::snap_to_grid(du));
            flow.v(i, j) = static_cast<float>(detail::snap_to_grid(p.y() - i));
        }
    }
    return flow;
}

Image sphere_texture(int height, int width, int channels, std::uint64_t seed) {
    constexpr int kWaves = 4;
    struct Wave {
        Eigen::Vector3d dir;
        double freq, phase, amp;
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Image img(height, width, channels);
    std::vector<Wave> waves;
    for (int c = 0; c < channels; ++c) {
        waves.clear();
        for (int k = 0; k < kWaves; ++k) {
            Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
            dir.normalize();
            waves.push_back({dir, 3.0 + 6.0 * unit(rng), kTwoPi * unit(rng),
                             0.45 / kWaves * (0.5 + 0.5 * unit(rng))});
        }
        for (int i = 0; i < height; ++i) {
            for (int j = 0; j < width; ++j) {
                const Eigen::Vector3d d = pixel_direction(i, j, height, width);
                double value = 0.5;
                for (const Wave& w : waves) value += w.amp * std::sin(w.freq * w.dir.dot(d) + w.phase);
                img.at(i, j, c) = static_cast<float>(value);
            }
        }
    }
    return img;
}

}  // namespace flow360
