#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flow360/exec.hpp"
#include "flow360/raster.hpp"

namespace flow360 {

/// Convolution kernel, stored [c_out][c_in][k_h][k_w]. k_h and k_w are odd so
/// the support is centred on the output pixel.
class Kernel {
public:
    Kernel() = default;
    Kernel(int kh, int kw, int c_in, int c_out, float fill = 0.0f);

    int kh() const noexcept { return kh_; }
    int kw() const noexcept { return kw_; }
    int c_in() const noexcept { return c_in_; }
    int c_out() const noexcept { return c_out_; }
    int taps() const noexcept { return kh_ * kw_; }

    float& at(int co, int ci, int y, int x) { return data_[index(co, ci, y, x)]; }
    float at(int co, int ci, int y, int x) const { return data_[index(co, ci, y, x)]; }

    /// The kh*kw coefficients of one (c_out, c_in) pair, row-major.
    std::span<float> slice(int co, int ci) { return {data_.data() + index(co, ci, 0, 0), static_cast<std::size_t>(taps())}; }
    std::span<const float> slice(int co, int ci) const { return {data_.data() + index(co, ci, 0, 0), static_cast<std::size_t>(taps())}; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool same_shape(const Kernel& o) const noexcept {
        return kh_ == o.kh_ && kw_ == o.kw_ && c_in_ == o.c_in_ && c_out_ == o.c_out_;
    }
    bool operator==(const Kernel&) const = default;

private:
    std::size_t index(int co, int ci, int y, int x) const noexcept {
        return ((static_cast<std::size_t>(co) * c_in_ + ci) * kh_ + y) * kw_ + x;
    }

    int kh_ = 0;
    int kw_ = 0;
    int c_in_ = 0;
    int c_out_ = 0;
    std::vector<float> data_;
};

/// H x W x C activations, interleaved like Image but with any channel count.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int height, int width, int channels, float fill = 0.0f);
    static FeatureMap from_image(const Image& img);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }

    float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool same_shape(const FeatureMap& o) const noexcept {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }
    bool operator==(const FeatureMap&) const = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Zero: taps outside the map contribute nothing.
/// HorizontalWrap: columns wrap around the seam; rows past the top/bottom edge
/// reflect across the pole with a half-turn column shift, so a constant map
/// stays constant.
enum class Padding { Zero, HorizontalWrap };

/// Same-size cross-correlation; accumulation in double, output float.
FeatureMap conv2d(const FeatureMap& x, const Kernel& k, Padding padding,
                  Exec exec = Exec::Parallel);

struct RowRange {
    int start = 0;
    int end = 0;  // exclusive
    bool operator==(const RowRange&) const = default;
};

/// Row groups of `rows_per_group` rows. Every group except the last extends
/// `interleave` rows into its successor.
struct RowGroupPlan {
    int height = 0;
    int rows_per_group = 0;
    int interleave = 0;
    std::vector<RowRange> ranges;

    int group_count() const noexcept { return static_cast<int>(ranges.size()); }
    /// Rows owned by group g alone for loss purposes: [g n_g, (g+1) n_g).
    RowRange core_rows(int g) const noexcept {
        return {g * rows_per_group, (g + 1) * rows_per_group};
    }
};

/// Throws Error{InvalidArgument} unless rows_per_group divides height and
/// 0 <= interleave <= rows_per_group.
RowGroupPlan rowgroup_partition(int height, int rows_per_group, int interleave = 3);

/// Blend weights of a row: the owning group(s) and the weight of the later
/// one. Rows in the overlap of groups g and g+1 at offset t in [0, n_l) get
/// weight (t + 1) / (n_l + 1) for g+1 and the rest for g.
struct RowBlend {
    int first = 0;
    int second = -1;     // -1 when a single group covers the row
    double weight = 0.0; // weight of `second`
};
RowBlend row_blend(const RowGroupPlan& plan, int row);

/// Each group's kernel computes the rows of its range; overlap rows blend the
/// two results as a + w (b - a).
FeatureMap interleaved_conv(const FeatureMap& x, std::span<const Kernel> kernels,
                            const RowGroupPlan& plan, Padding padding,
                            Exec exec = Exec::Parallel);

/// Maps a flattened source kernel (source_h * source_w) to a flattened target
/// kernel (target_h * target_w). coeffs is row-major, target-major.
struct ProjectionMatrix {
    int target_h = 0;
    int target_w = 0;
    int source_h = 0;
    int source_w = 0;
    std::vector<float> coeffs;

    int rows() const noexcept { return target_h * target_w; }
    int cols() const noexcept { return source_h * source_w; }
    float& at(int r, int c) { return coeffs[static_cast<std::size_t>(r) * cols() + c]; }
    float at(int r, int c) const { return coeffs[static_cast<std::size_t>(r) * cols() + c]; }

    /// Centre-aligned identity embedding: target tap (dy, dx) copies source tap
    /// (dy, dx) when it exists. Equal sizes give the identity matrix.
    static ProjectionMatrix identity(int target_h, int target_w, int source_h, int source_w);

    bool operator==(const ProjectionMatrix&) const = default;
};

/// One matrix per row group.
struct ProjectionMatrixSet {
    std::vector<ProjectionMatrix> matrices;

    int size() const noexcept { return static_cast<int>(matrices.size()); }
    static ProjectionMatrixSet identity(int groups, int target_h, int target_w, int source_h,
                                        int source_w);
    bool operator==(const ProjectionMatrixSet&) const = default;
};

/// Per group: target kernel slice (co, ci) = P_g * flatten(k slice (co, ci)).
std::vector<Kernel> apply_projection(const ProjectionMatrixSet& p, const Kernel& k);

/// Sum of squared differences.
double layer_l2_loss(const FeatureMap& y_src, const FeatureMap& y_tgt);

/// Mean over groups of the squared error on each group's core rows.
double rowgroup_loss(const FeatureMap& y_src, const FeatureMap& y_tgt, const RowGroupPlan& plan);

enum class FitMethod { LeastSquares, GradientDescent };

/// How rows of the source-network output correspond to rows of the
/// transformed layer's output. Identity for un-augmented inputs;
/// SphericalProjection pushes the source output through project_omega.
enum class Correspondence { Identity, SphericalProjection };

struct FitOptions {
    FitMethod method = FitMethod::LeastSquares;
    Correspondence correspondence = Correspondence::Identity;
    Padding padding = Padding::HorizontalWrap;
    int target_h = 0;  // 0: same as source kernel
    int target_w = 0;
    double step = 0.0;  // gradient descent; <= 0 picks 1 / L from power iteration
    int iters = 500;
    double tol = 1e-12;  // relative loss decrease that ends gradient descent
    double ridge = 1e-8;
    int power_iters = 50;
    Exec exec = Exec::Parallel;
};

struct FitResult {
    ProjectionMatrixSet projections;
    std::vector<double> loss_trace;
    double final_loss = 0.0;
    double step = 0.0;          // step used by gradient descent
    double lipschitz = 0.0;     // power-iteration estimate (gradient descent)
    bool degenerate = false;    // normal matrix cannot pin down the target kernels
};

/// Spherical projection of every channel of a 2:1 feature map.
FeatureMap project_omega(const FeatureMap& x, Interp interp = Interp::Bilinear,
                         Exec exec = Exec::Parallel);

/// Layer transformation objective: for a batch of source inputs,
/// transformed-layer inputs and a fixed source kernel,
///   L(P) = mean_b rowgroup_loss(interleaved_conv(x_aug_b, apply_projection(P, k)),
///                               target_b)
/// with target_b = conv2d(x_src_b, k), optionally pushed through
/// project_omega. Evaluated in double precision throughout.
///
/// Parameters are packed as [group][target tap][source tap].
class TransformProblem {
public:
    TransformProblem(std::span<const FeatureMap> x_src, std::span<const FeatureMap> x_aug,
                     const Kernel& k_src, const RowGroupPlan& plan, const FitOptions& opts);

    std::size_t parameter_count() const noexcept;
    std::vector<double> pack(const ProjectionMatrixSet& p) const;
    ProjectionMatrixSet unpack(std::span<const double> params) const;
    std::vector<double> initial_parameters() const;

    double loss(std::span<const double> params) const;
    std::vector<double> gradient(std::span<const double> params) const;
    double loss(const ProjectionMatrixSet& p) const { return loss(pack(p)); }

    int groups() const noexcept { return plan_.group_count(); }
    int target_h() const noexcept { return th_; }
    int target_w() const noexcept { return tw_; }
    const Kernel& source_kernel() const noexcept { return k_; }
    const std::vector<FeatureMap>& targets() const noexcept { return targets_; }

    /// The objective is the quadratic L(p) = p^T A p - 2 b^T p + c.
    struct Quadratic {
        std::vector<double> a;  // n x n, row-major
        std::vector<double> b;
        double c = 0.0;
    };
    Quadratic normal_equations() const;

    /// Rank of the map P -> (P_g k_{co,ci}); the most any data can pin down.
    int identifiable_rank() const;

private:
    std::vector<double> flat_kernels(std::span<const double> params) const;
    void gather_patch(const FeatureMap& x, int row, int col, double* out) const;
    double image_loss(std::size_t b, const std::vector<double>& kernels, double* grad_k) const;

    std::vector<FeatureMap> x_aug_;
    std::vector<FeatureMap> targets_;
    Kernel k_;
    RowGroupPlan plan_;
    Padding padding_;
    int th_ = 0;
    int tw_ = 0;
    Exec exec_;
};

/// Fits one projection matrix per row group. Least squares solves the ridge
/// normal equations around the identity embedding (trace: initial, final).
/// Gradient descent iterates from the identity embedding with step 1/L.
/// Throws Error{Divergence} if the loss grows for 5 consecutive iterations.
FitResult fit_transform(std::span<const FeatureMap> x_src, std::span<const FeatureMap> x_aug,
                        const Kernel& k_src, const RowGroupPlan& plan, const FitOptions& opts);

// Binary containers, little-endian throughout:
//   kernel:     "F3KN" u32 kh u32 kw u32 c_in u32 c_out, f32 payload [co][ci][y][x]
//   projection: "F3PM" u32 count, then per matrix
//               u32 target_h u32 target_w u32 source_h u32 source_w, f32 row-major
//   features:   "F3FM" u32 count u32 height u32 width u32 channels, f32 payload
std::vector<std::uint8_t> encode_kernel(const Kernel& k);
Kernel decode_kernel(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_projections(const ProjectionMatrixSet& p);
ProjectionMatrixSet decode_projections(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_feature_batch(std::span<const FeatureMap> batch);
std::vector<FeatureMap> decode_feature_batch(std::span<const std::uint8_t> bytes);

Kernel read_kernel(const std::filesystem::path& path);
void write_kernel(const Kernel& k, const std::filesystem::path& path);
ProjectionMatrixSet read_projections(const std::filesystem::path& path);
void write_projections(const ProjectionMatrixSet& p, const std::filesystem::path& path);
std::vector<FeatureMap> read_feature_batch(const std::filesystem::path& path);
void write_feature_batch(std::span<const FeatureMap> batch, const std::filesystem::path& path);

}  // namespace flow360
