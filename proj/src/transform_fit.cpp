#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"
#include "flow360/sphconv.hpp"
#include "flow360/sphere.hpp"

namespace flow360 {

namespace {

constexpr EdgePolicy kSpherePadding{HorizontalEdge::Wrap, VerticalEdge::ReflectShift};
constexpr EdgePolicy kProjectionPolicy{HorizontalEdge::Wrap, VerticalEdge::Clamp};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_batch(std::span<const FeatureMap> x_src, std::span<const FeatureMap> x_aug,
                 const Kernel& k, const RowGroupPlan& plan) {
    if (x_src.empty()) throw Error(ErrorCode::InvalidArgument, "fit: empty batch");
    if (x_src.size() != x_aug.size()) {
        throw Error(ErrorCode::DimensionMismatch, "fit: source and augmented batches differ in size");
    }
    for (std::size_t b = 0; b < x_src.size(); ++b) {
        if (!x_src[b].same_shape(x_aug[b])) {
            throw Error(ErrorCode::DimensionMismatch,
                        "fit: batch item " + std::to_string(b) + " differs in shape");
        }
        if (x_src[b].channels() != k.c_in()) {
            throw Error(ErrorCode::DimensionMismatch, "fit: kernel input channels do not match");
        }
        if (x_src[b].height() != plan.height) {
            throw Error(ErrorCode::DimensionMismatch, "fit: plan height differs from features");
        }
    }
}

// Parallel loop over batch items; results land in per-item slots so the
// reduction order is fixed.
template <class F>
void for_each_item(std::size_t n, Exec exec, F&& f) {
    if (exec == Exec::Serial) {
        for (std::size_t b = 0; b < n; ++b) f(b);
        return;
    }
#pragma omp parallel for schedule(dynamic)
    for (long long b = 0; b < static_cast<long long>(n); ++b) f(static_cast<std::size_t>(b));
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

FeatureMap project_omega(const FeatureMap& x, Interp interp, Exec exec) {
    if (x.width() != 2 * x.height()) {
        throw Error(ErrorCode::AspectRatio, "equirectangular feature map must be 2:1, got " +
                                                std::to_string(x.height()) + "x" +
                                                std::to_string(x.width()));
    }
    FeatureMap out(x.height(), x.width(), x.channels());
    remap_raw(x.data().data(), x.height(), x.width(), x.channels(),
              omega_grid(x.height(), x.width()), kProjectionPolicy, interp, exec,
              out.data().data());
    return out;
}

TransformProblem::TransformProblem(std::span<const FeatureMap> x_src,
                                   std::span<const FeatureMap> x_aug, const Kernel& k_src,
                                   const RowGroupPlan& plan, const FitOptions& opts)
    : x_aug_(x_aug.begin(), x_aug.end()),
      k_(k_src),
      plan_(plan),
      padding_(opts.padding),
      th_(opts.target_h > 0 ? opts.target_h : k_src.kh()),
      tw_(opts.target_w > 0 ? opts.target_w : k_src.kw()),
      exec_(opts.exec) {
    check_batch(x_src, x_aug, k_src, plan);
    if (th_ % 2 == 0 || tw_ % 2 == 0) {
        throw Error(ErrorCode::InvalidArgument, "fit: target kernel size must be odd");
    }
    targets_.reserve(x_src.size());
    for (const FeatureMap& x : x_src) {
        FeatureMap y = conv2d(x, k_, padding_, exec_);
        if (opts.correspondence == Correspondence::SphericalProjection) {
            y = project_omega(y, Interp::Bilinear, exec_);
        }
        targets_.push_back(std::move(y));
    }
}

std::size_t TransformProblem::parameter_count() const noexcept {
    return static_cast<std::size_t>(groups()) * th_ * tw_ * k_.taps();
}

std::vector<double> TransformProblem::pack(const ProjectionMatrixSet& p) const {
    if (p.size() != groups()) {
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(groups()) +
                                                      " projection matrices, got " +
                                                      std::to_string(p.size()));
    }
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const ProjectionMatrix& m : p.matrices) {
        if (m.target_h != th_ || m.target_w != tw_ || m.source_h != k_.kh() ||
            m.source_w != k_.kw() || m.coeffs.size() != static_cast<std::size_t>(m.rows()) * m.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "projection matrix has the wrong shape");
        }
        out.insert(out.end(), m.coeffs.begin(), m.coeffs.end());
    }
    return out;
}

ProjectionMatrixSet TransformProblem::unpack(std::span<const double> params) const {
    if (params.size() != parameter_count()) {
        throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong length");
    }
    ProjectionMatrixSet set = ProjectionMatrixSet::identity(groups(), th_, tw_, k_.kh(), k_.kw());
    std::size_t i = 0;
    for (ProjectionMatrix& m : set.matrices) {
        for (float& c : m.coeffs) c = static_cast<float>(params[i++]);
    }
    return set;
}

std::vector<double> TransformProblem::initial_parameters() const {
    return pack(ProjectionMatrixSet::identity(groups(), th_, tw_, k_.kh(), k_.kw()));
}

// K[g][co][ci][a] = sum_b P_g[a][b] k[co][ci][b]
std::vector<double> TransformProblem::flat_kernels(std::span<const double> params) const {
    if (params.size() != parameter_count()) {
        throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong length");
    }
    const int t = th_ * tw_;
    const int s = k_.taps();
    std::vector<double> out(static_cast<std::size_t>(groups()) * k_.c_out() * k_.c_in() * t);
    std::size_t o = 0;
    for (int g = 0; g < groups(); ++g) {
        const double* p = params.data() + static_cast<std::size_t>(g) * t * s;
        for (int co = 0; co < k_.c_out(); ++co) {
            for (int ci = 0; ci < k_.c_in(); ++ci) {
                const auto src = k_.slice(co, ci);
                for (int a = 0; a < t; ++a) {
                    double sum = 0.0;
                    for (int b = 0; b < s; ++b) sum += p[a * s + b] * src[b];
                    out[o++] = sum;
                }
            }
        }
    }
    return out;
}

// out[ci * t + a]: the input under target tap a, zero where padding applies.
void TransformProblem::gather_patch(const FeatureMap& x, int row, int col, double* out) const {
    const int t = th_ * tw_;
    for (int dy = 0; dy < th_; ++dy) {
        for (int dx = 0; dx < tw_; ++dx) {
            long long r = row + dy - th_ / 2;
            long long c = col + dx - tw_ / 2;
            const int a = dy * tw_ + dx;
            bool inside = true;
            if (padding_ == Padding::Zero) {
                inside = r >= 0 && r < x.height() && c >= 0 && c < x.width();
            } else {
                detail::resolve_index(r, c, x.height(), x.width(), kSpherePadding);
            }
            for (int ci = 0; ci < x.channels(); ++ci) {
                out[ci * t + a] = inside ? x.at(static_cast<int>(r), static_cast<int>(c), ci) : 0.0;
            }
        }
    }
}

// Sum of squared errors for one batch item; accumulates dSSE/dK when grad_k
// is non-null.
double TransformProblem::image_loss(std::size_t b, const std::vector<double>& kernels,
                                    double* grad_k) const {
    const FeatureMap& x = x_aug_[b];
    const FeatureMap& y = targets_[b];
    const int t = th_ * tw_;
    const int cin = k_.c_in();
    const int cout = k_.c_out();
    const std::size_t pair = static_cast<std::size_t>(cin) * t;
    const std::size_t group = pair * cout;
    std::vector<double> patch(pair);
    double sse = 0.0;
    for (int i = 0; i < x.height(); ++i) {
        const RowBlend blend = row_blend(plan_, i);
        for (int j = 0; j < x.width(); ++j) {
            gather_patch(x, i, j, patch.data());
            for (int co = 0; co < cout; ++co) {
                const double* ka = kernels.data() + blend.first * group + co * pair;
                double pred = std::inner_product(patch.begin(), patch.end(), ka, 0.0);
                double yb = 0.0;
                if (blend.second >= 0) {
                    const double* kb = kernels.data() + blend.second * group + co * pair;
                    yb = std::inner_product(patch.begin(), patch.end(), kb, 0.0);
                    pred = pred + blend.weight * (yb - pred);
                }
                const double e = pred - y.at(i, j, co);
                sse += e * e;
                if (grad_k == nullptr) continue;
                const double wa = blend.second >= 0 ? 1.0 - blend.weight : 1.0;
                double* ga = grad_k + blend.first * group + co * pair;
                for (std::size_t q = 0; q < pair; ++q) ga[q] += 2.0 * e * wa * patch[q];
                if (blend.second >= 0) {
                    double* gb = grad_k + blend.second * group + co * pair;
                    for (std::size_t q = 0; q < pair; ++q) gb[q] += 2.0 * e * blend.weight * patch[q];
                }
            }
        }
    }
    return sse;
}

double TransformProblem::loss(std::span<const double> params) const {
    const std::vector<double> kernels = flat_kernels(params);
    std::vector<double> partial(x_aug_.size());
    for_each_item(x_aug_.size(), exec_,
                  [&](std::size_t b) { partial[b] = image_loss(b, kernels, nullptr); });
    const double sum = std::accumulate(partial.begin(), partial.end(), 0.0);
    return sum / (static_cast<double>(x_aug_.size()) * groups());
}

std::vector<double> TransformProblem::gradient(std::span<const double> params) const {
    const std::vector<double> kernels = flat_kernels(params);
    const std::size_t nk = kernels.size();
    std::vector<std::vector<double>> partial(x_aug_.size(), std::vector<double>(nk, 0.0));
    for_each_item(x_aug_.size(), exec_,
                  [&](std::size_t b) { image_loss(b, kernels, partial[b].data()); });
    std::vector<double> gk(nk, 0.0);
    for (const auto& p : partial) {
        for (std::size_t q = 0; q < nk; ++q) gk[q] += p[q];
    }
    const double scale = 1.0 / (static_cast<double>(x_aug_.size()) * groups());

    const int t = th_ * tw_;
    const int s = k_.taps();
    std::vector<double> grad(parameter_count(), 0.0);
    std::size_t o = 0;
    for (int g = 0; g < groups(); ++g) {
        double* dp = grad.data() + static_cast<std::size_t>(g) * t * s;
        for (int co = 0; co < k_.c_out(); ++co) {
            for (int ci = 0; ci < k_.c_in(); ++ci) {
                const auto src = k_.slice(co, ci);
                for (int a = 0; a < t; ++a, ++o) {
                    const double ga = gk[o] * scale;
                    for (int b = 0; b < s; ++b) dp[a * s + b] += ga * src[b];
                }
            }
        }
    }
    return grad;
}

TransformProblem::Quadratic TransformProblem::normal_equations() const {
    const int t = th_ * tw_;
    const int s = k_.taps();
    const int ts = t * s;
    const int G = groups();
    const int cin = k_.c_in();
    const int cout = k_.c_out();

    // Source kernels as (c_in x s) matrices, one per output channel.
    std::vector<RowMatrix> kmat(cout, RowMatrix(cin, s));
    for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
            const auto src = k_.slice(co, ci);
            for (int b = 0; b < s; ++b) kmat[co](ci, b) = src[b];
        }
    }

    // Only same-group and neighbouring-group blocks are ever non-zero.
    struct Partial {
        std::vector<Eigen::MatrixXd> diag, upper;
        Eigen::VectorXd rhs;
        double c = 0.0;
    };
    std::vector<Partial> partial(x_aug_.size());

    for_each_item(x_aug_.size(), exec_, [&](std::size_t item) {
        Partial& acc = partial[item];
        acc.diag.assign(G, Eigen::MatrixXd::Zero(ts, ts));
        acc.upper.assign(std::max(G - 1, 0), Eigen::MatrixXd::Zero(ts, ts));
        acc.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(G) * ts);
        const FeatureMap& x = x_aug_[item];
        const FeatureMap& y = targets_[item];
        const int rows = x.width() * cout;
        RowMatrix f(rows, ts);
        Eigen::VectorXd yv(rows);
        RowMatrix patch(cin, t);
        for (int i = 0; i < x.height(); ++i) {
            for (int j = 0; j < x.width(); ++j) {
                gather_patch(x, i, j, patch.data());
                for (int co = 0; co < cout; ++co) {
                    const RowMatrix feat = patch.transpose() * kmat[co];  // t x s
                    f.row(j * cout + co) = Eigen::Map<const Eigen::RowVectorXd>(feat.data(), ts);
                    yv(j * cout + co) = y.at(i, j, co);
                }
            }
            const RowBlend blend = row_blend(plan_, i);
            acc.c += yv.squaredNorm();
            if (blend.second < 0) {
                acc.diag[blend.first].selfadjointView<Eigen::Lower>().rankUpdate(f.transpose());
                acc.rhs.segment(static_cast<Eigen::Index>(blend.first) * ts, ts) += f.transpose() * yv;
            } else {
                const RowMatrix fa = (1.0 - blend.weight) * f;
                const RowMatrix fb = blend.weight * f;
                acc.diag[blend.first].selfadjointView<Eigen::Lower>().rankUpdate(fa.transpose());
                acc.diag[blend.second].selfadjointView<Eigen::Lower>().rankUpdate(fb.transpose());
                acc.upper[blend.first] += fa.transpose() * fb;
                acc.rhs.segment(static_cast<Eigen::Index>(blend.first) * ts, ts) += fa.transpose() * yv;
                acc.rhs.segment(static_cast<Eigen::Index>(blend.second) * ts, ts) += fb.transpose() * yv;
            }
        }
    });

    const Eigen::Index n = static_cast<Eigen::Index>(G) * ts;
    RowMatrix a = RowMatrix::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    double c = 0.0;
    for (const Partial& p : partial) {
        for (int g = 0; g < G; ++g) {
            const Eigen::MatrixXd full = p.diag[g].selfadjointView<Eigen::Lower>();
            a.block(static_cast<Eigen::Index>(g) * ts, static_cast<Eigen::Index>(g) * ts, ts, ts) += full;
        }
        for (int g = 0; g + 1 < G; ++g) {
            a.block(static_cast<Eigen::Index>(g) * ts, static_cast<Eigen::Index>(g + 1) * ts, ts, ts) += p.upper[g];
            a.block(static_cast<Eigen::Index>(g + 1) * ts, static_cast<Eigen::Index>(g) * ts, ts, ts) += p.upper[g].transpose();
        }
        rhs += p.rhs;
        c += p.c;
    }
    const double scale = 1.0 / (static_cast<double>(x_aug_.size()) * G);
    Quadratic q;
    q.a.assign(a.data(), a.data() + n * n);
    q.b.assign(rhs.data(), rhs.data() + n);
    for (double& v : q.a) v *= scale;
    for (double& v : q.b) v *= scale;
    q.c = c * scale;
    return q;
}

int TransformProblem::identifiable_rank() const {
    const int s = k_.taps();
    Eigen::MatrixXd km(s, k_.c_in() * k_.c_out());
    for (int co = 0; co < k_.c_out(); ++co) {
        for (int ci = 0; ci < k_.c_in(); ++ci) {
            const auto src = k_.slice(co, ci);
            for (int b = 0; b < s; ++b) km(b, co * k_.c_in() + ci) = src[b];
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(km);
    return static_cast<int>(lu.rank()) * groups() * th_ * tw_;
}

namespace {

FitResult fit_least_squares(const TransformProblem& problem, const FitOptions& opts) {
    const std::vector<double> p0 = problem.initial_parameters();
    const TransformProblem::Quadratic q = problem.normal_equations();
    const Eigen::Index n = static_cast<Eigen::Index>(p0.size());
    const Eigen::Map<const RowMatrix> a(q.a.data(), n, n);
    const Eigen::Map<const Eigen::VectorXd> b(q.b.data(), n);
    const Eigen::Map<const Eigen::VectorXd> x0(p0.data(), n);

    Eigen::MatrixXd m = a;
    m.diagonal().array() += opts.ridge;
    const Eigen::VectorXd rhs = b - a * x0;
    Eigen::VectorXd delta;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
        delta = llt.solve(rhs);
    } else {
        delta = m.ldlt().solve(rhs);
    }
    std::vector<double> p(p0);
    for (Eigen::Index i = 0; i < n; ++i) p[i] += delta(i);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().size() ? eig.eigenvalues().maxCoeff() : 0.0;
    int rank = 0;
    if (top > 0.0) {
        for (double e : eig.eigenvalues()) rank += e > top * 1e-10 ? 1 : 0;
    }

    FitResult result;
    result.degenerate = top <= 0.0 || rank < problem.identifiable_rank();
    result.loss_trace = {problem.loss(p0), problem.loss(p)};
    result.final_loss = result.loss_trace.back();
    result.projections = problem.unpack(p);
    return result;
}

FitResult fit_gradient_descent(const TransformProblem& problem, const FitOptions& opts) {
    std::vector<double> p = problem.initial_parameters();
    const std::size_t n = p.size();

    // Power iteration on the normal operator v -> grad(v) - grad(0).
    const std::vector<double> zero(n, 0.0);
    const std::vector<double> g0 = problem.gradient(zero);
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    double lipschitz = 0.0;
    const double vn = norm2(v);
    for (double& x : v) x /= vn;
    for (int it = 0; it < opts.power_iters; ++it) {
        std::vector<double> hv = problem.gradient(v);
        for (std::size_t i = 0; i < n; ++i) hv[i] -= g0[i];
        lipschitz = norm2(hv);
        if (lipschitz == 0.0) break;
        for (std::size_t i = 0; i < n; ++i) v[i] = hv[i] / lipschitz;
    }

    FitResult result;
    result.lipschitz = lipschitz;
    result.step = opts.step > 0.0 ? opts.step : (lipschitz > 0.0 ? 1.0 / lipschitz : 0.0);
    result.degenerate = lipschitz == 0.0;
    double prev = problem.loss(p);
    result.loss_trace.push_back(prev);

    int rising = 0;
    for (int it = 0; it < opts.iters && result.step > 0.0 && prev > 0.0; ++it) {
        const std::vector<double> g = problem.gradient(p);
        for (std::size_t i = 0; i < n; ++i) p[i] -= result.step * g[i];
        const double cur = problem.loss(p);
        if (!std::isfinite(cur)) {
            throw Error(ErrorCode::Divergence, "gradient descent produced a non-finite loss");
        }
        result.loss_trace.push_back(cur);
        if (cur > prev * (1.0 + 1e-9)) {
            if (++rising >= 5) {
                throw Error(ErrorCode::Divergence,
                            "loss increased for 5 consecutive iterations (step " +
                                std::to_string(result.step) + ")");
            }
        } else {
            rising = 0;
            if (prev - cur <= opts.tol * prev) {
                prev = cur;
                break;
            }
        }
        prev = cur;
    }
    result.final_loss = result.loss_trace.back();
    result.projections = problem.unpack(p);
    return result;
}

}  // namespace

FitResult fit_transform(std::span<const FeatureMap> x_src, std::span<const FeatureMap> x_aug,
                        const Kernel& k_src, const RowGroupPlan& plan, const FitOptions& opts) {
    const TransformProblem problem(x_src, x_aug, k_src, plan, opts);
    if (opts.method == FitMethod::LeastSquares) return fit_least_squares(problem, opts);
    return fit_gradient_descent(problem, opts);
}

}  // namespace flow360
