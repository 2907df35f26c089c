#include <cmath>
#include <string>

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"
#include "flow360/sphconv.hpp"

namespace flow360 {

namespace {

constexpr EdgePolicy kSpherePadding{HorizontalEdge::Wrap, VerticalEdge::ReflectShift};

void check_kernel_dims(int kh, int kw) {
    if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0) {
        throw Error(ErrorCode::InvalidArgument, "kernel size must be odd, got " +
                                                    std::to_string(kh) + "x" + std::to_string(kw));
    }
}

void check_conv_shapes(const FeatureMap& x, const Kernel& k) {
    if (k.c_in() != x.channels()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "kernel expects " + std::to_string(k.c_in()) + " input channels, map has " +
                        std::to_string(x.channels()));
    }
}

// Resolves tap (r, c); false when the tap falls into zero padding.
bool resolve_tap(long long& r, long long& c, int h, int w, Padding padding) {
    if (padding == Padding::Zero) return r >= 0 && r < h && c >= 0 && c < w;
    detail::resolve_index(r, c, h, w, kSpherePadding);
    return true;
}

// Serial reference: one output value, accumulated over (ci, ky, kx) in order.
double conv_at(const FeatureMap& x, const Kernel& k, int co, int i, int j, Padding padding) {
    double sum = 0.0;
    for (int ci = 0; ci < k.c_in(); ++ci) {
        for (int ky = 0; ky < k.kh(); ++ky) {
            for (int kx = 0; kx < k.kw(); ++kx) {
                long long r = i + ky - k.kh() / 2;
                long long c = j + kx - k.kw() / 2;
                if (!resolve_tap(r, c, x.height(), x.width(), padding)) continue;
                sum += static_cast<double>(k.at(co, ci, ky, kx)) *
                       x.at(static_cast<int>(r), static_cast<int>(c), ci);
            }
        }
    }
    return sum;
}

// Row-at-a-time convolution with tap tables hoisted out of the pixel loop.
// Accumulation order matches conv_at, so results are bit-identical.
class RowConvolver {
public:
    RowConvolver(const FeatureMap& x, int kh, int kw, Padding padding)
        : x_(x), kh_(kh), kw_(kw), padding_(padding) {
        const int w = x.width();
        for (int s = 0; s < 2; ++s) {
            cols_[s].resize(static_cast<std::size_t>(w) * kw);
            for (int j = 0; j < w; ++j) {
                for (int kx = 0; kx < kw; ++kx) {
                    long long c = j + kx - kw / 2 + (s ? w / 2 : 0);
                    int idx = -1;
                    if (padding == Padding::Zero) {
                        if (s == 0 && c >= 0 && c < w) idx = static_cast<int>(c);
                    } else {
                        c %= w;
                        if (c < 0) c += w;
                        idx = static_cast<int>(c);
                    }
                    cols_[s][static_cast<std::size_t>(j) * kw + kx] = idx;
                }
            }
        }
        rows_.resize(kh);
        shifted_.resize(kh);
    }

    // out[j * c_out + co] for every column of row i.
    void run(const Kernel& k, int i, double* out) {
        const int h = x_.height();
        const int w = x_.width();
        const int cin = x_.channels();
        for (int ky = 0; ky < kh_; ++ky) {
            long long r = i + ky - kh_ / 2;
            shifted_[ky] = 0;
            if (padding_ == Padding::Zero) {
                rows_[ky] = (r >= 0 && r < h) ? static_cast<int>(r) : -1;
            } else {
                long long c = 0;
                detail::resolve_index(r, c, h, w, kSpherePadding);
                rows_[ky] = static_cast<int>(r);
                shifted_[ky] = c != 0 ? 1 : 0;
            }
        }
        const float* xd = x_.data().data();
        for (int j = 0; j < w; ++j) {
            for (int co = 0; co < k.c_out(); ++co) {
                double sum = 0.0;
                for (int ci = 0; ci < cin; ++ci) {
                    const float* kc = k.slice(co, ci).data();
                    for (int ky = 0; ky < kh_; ++ky) {
                        if (rows_[ky] < 0) continue;
                        const int* cols = cols_[shifted_[ky]].data() + static_cast<std::size_t>(j) * kw_;
                        const float* xrow = xd + static_cast<std::size_t>(rows_[ky]) * w * cin;
                        for (int kx = 0; kx < kw_; ++kx) {
                            if (cols[kx] < 0) continue;
                            sum += static_cast<double>(kc[ky * kw_ + kx]) *
                                   xrow[static_cast<std::size_t>(cols[kx]) * cin + ci];
                        }
                    }
                }
                out[static_cast<std::size_t>(j) * k.c_out() + co] = sum;
            }
        }
    }

private:
    const FeatureMap& x_;
    int kh_, kw_;
    Padding padding_;
    std::vector<int> cols_[2];
    std::vector<int> rows_;
    std::vector<int> shifted_;
};

void check_group_kernels(std::span<const Kernel> kernels, const RowGroupPlan& plan,
                         const FeatureMap& x) {
    if (static_cast<int>(kernels.size()) != plan.group_count()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(plan.group_count()) + " kernels, got " +
                        std::to_string(kernels.size()));
    }
    if (plan.height != x.height()) {
        throw Error(ErrorCode::DimensionMismatch, "row-group plan height differs from feature map");
    }
    for (const Kernel& k : kernels) {
        if (!k.same_shape(kernels.front())) {
            throw Error(ErrorCode::DimensionMismatch, "row-group kernels differ in shape");
        }
        check_conv_shapes(x, k);
    }
}

}  // namespace

Kernel::Kernel(int kh, int kw, int c_in, int c_out, float fill)
    : kh_(kh), kw_(kw), c_in_(c_in), c_out_(c_out) {
    check_kernel_dims(kh, kw);
    if (c_in < 1 || c_out < 1) throw Error(ErrorCode::ZeroDimension, "kernel channels must be >= 1");
    data_.assign(static_cast<std::size_t>(kh) * kw * c_in * c_out, fill);
}

FeatureMap::FeatureMap(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
        throw Error(ErrorCode::ZeroDimension, "feature map dimensions must be >= 1");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

FeatureMap FeatureMap::from_image(const Image& img) {
    FeatureMap f(img.height(), img.width(), img.channels());
    std::copy(img.data().begin(), img.data().end(), f.data_.begin());
    return f;
}

FeatureMap conv2d(const FeatureMap& x, const Kernel& k, Padding padding, Exec exec) {
    check_conv_shapes(x, k);
    FeatureMap y(x.height(), x.width(), k.c_out());
    if (exec == Exec::Serial) {
        for (int i = 0; i < x.height(); ++i) {
            for (int j = 0; j < x.width(); ++j) {
                for (int co = 0; co < k.c_out(); ++co) {
                    y.at(i, j, co) = static_cast<float>(conv_at(x, k, co, i, j, padding));
                }
            }
        }
        return y;
    }
    const std::size_t row_len = static_cast<std::size_t>(x.width()) * k.c_out();
#pragma omp parallel
    {
        RowConvolver conv(x, k.kh(), k.kw(), padding);
        std::vector<double> row(row_len);
#pragma omp for schedule(static)
        for (int i = 0; i < x.height(); ++i) {
            conv.run(k, i, row.data());
            float* dst = y.data().data() + static_cast<std::size_t>(i) * row_len;
            for (std::size_t t = 0; t < row_len; ++t) dst[t] = static_cast<float>(row[t]);
        }
    }
    return y;
}

RowGroupPlan rowgroup_partition(int height, int rows_per_group, int interleave) {
    if (height < 1 || rows_per_group < 1 || height % rows_per_group != 0) {
        throw Error(ErrorCode::InvalidArgument, "rows per group " + std::to_string(rows_per_group) +
                                                    " must divide height " + std::to_string(height));
    }
    if (interleave < 0 || interleave > rows_per_group) {
        throw Error(ErrorCode::InvalidArgument, "interleave must lie in [0, rows per group]");
    }
    RowGroupPlan plan;
    plan.height = height;
    plan.rows_per_group = rows_per_group;
    plan.interleave = interleave;
    const int groups = height / rows_per_group;
    for (int g = 0; g < groups; ++g) {
        const int start = g * rows_per_group;
        const int end = g < groups - 1 ? start + rows_per_group + interleave : start + rows_per_group;
        plan.ranges.push_back({start, end});
    }
    return plan;
}

RowBlend row_blend(const RowGroupPlan& plan, int row) {
    const int g = row / plan.rows_per_group;
    const int offset = row - g * plan.rows_per_group;
    if (g > 0 && offset < plan.interleave) {
        return {g - 1, g, static_cast<double>(offset + 1) / (plan.interleave + 1)};
    }
    return {g, -1, 0.0};
}

FeatureMap interleaved_conv(const FeatureMap& x, std::span<const Kernel> kernels,
                            const RowGroupPlan& plan, Padding padding, Exec exec) {
    check_group_kernels(kernels, plan, x);
    const Kernel& k0 = kernels.front();
    FeatureMap y(x.height(), x.width(), k0.c_out());

    if (exec == Exec::Serial) {
        for (int i = 0; i < x.height(); ++i) {
            const RowBlend b = row_blend(plan, i);
            for (int j = 0; j < x.width(); ++j) {
                for (int co = 0; co < k0.c_out(); ++co) {
                    double v = conv_at(x, kernels[b.first], co, i, j, padding);
                    if (b.second >= 0) {
                        const double v2 = conv_at(x, kernels[b.second], co, i, j, padding);
                        v = v + b.weight * (v2 - v);
                    }
                    y.at(i, j, co) = static_cast<float>(v);
                }
            }
        }
        return y;
    }

    const std::size_t row_len = static_cast<std::size_t>(x.width()) * k0.c_out();
#pragma omp parallel
    {
        RowConvolver conv(x, k0.kh(), k0.kw(), padding);
        std::vector<double> a(row_len), b2(row_len);
#pragma omp for schedule(static)
        for (int i = 0; i < x.height(); ++i) {
            const RowBlend b = row_blend(plan, i);
            conv.run(kernels[b.first], i, a.data());
            if (b.second >= 0) {
                conv.run(kernels[b.second], i, b2.data());
                for (std::size_t t = 0; t < row_len; ++t) a[t] = a[t] + b.weight * (b2[t] - a[t]);
            }
            float* dst = y.data().data() + static_cast<std::size_t>(i) * row_len;
            for (std::size_t t = 0; t < row_len; ++t) dst[t] = static_cast<float>(a[t]);
        }
    }
    return y;
}

ProjectionMatrix ProjectionMatrix::identity(int target_h, int target_w, int source_h,
                                            int source_w) {
    check_kernel_dims(target_h, target_w);
    check_kernel_dims(source_h, source_w);
    ProjectionMatrix p{target_h, target_w, source_h, source_w, {}};
    p.coeffs.assign(static_cast<std::size_t>(p.rows()) * p.cols(), 0.0f);
    for (int ty = 0; ty < target_h; ++ty) {
        for (int tx = 0; tx < target_w; ++tx) {
            const int sy = ty - target_h / 2 + source_h / 2;
            const int sx = tx - target_w / 2 + source_w / 2;
            if (sy < 0 || sy >= source_h || sx < 0 || sx >= source_w) continue;
            p.at(ty * target_w + tx, sy * source_w + sx) = 1.0f;
        }
    }
    return p;
}

ProjectionMatrixSet ProjectionMatrixSet::identity(int groups, int target_h, int target_w,
                                                  int source_h, int source_w) {
    ProjectionMatrixSet set;
    set.matrices.assign(static_cast<std::size_t>(groups),
                        ProjectionMatrix::identity(target_h, target_w, source_h, source_w));
    return set;
}

std::vector<Kernel> apply_projection(const ProjectionMatrixSet& p, const Kernel& k) {
    std::vector<Kernel> out;
    out.reserve(p.matrices.size());
    for (const ProjectionMatrix& m : p.matrices) {
        if (m.source_h != k.kh() || m.source_w != k.kw() ||
            m.coeffs.size() != static_cast<std::size_t>(m.rows()) * m.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "projection matrix does not fit the kernel");
        }
        Kernel t(m.target_h, m.target_w, k.c_in(), k.c_out());
        for (int co = 0; co < k.c_out(); ++co) {
            for (int ci = 0; ci < k.c_in(); ++ci) {
                const auto src = k.slice(co, ci);
                auto dst = t.slice(co, ci);
                for (int r = 0; r < m.rows(); ++r) {
                    double sum = 0.0;
                    for (int c = 0; c < m.cols(); ++c) sum += static_cast<double>(m.at(r, c)) * src[c];
                    dst[r] = static_cast<float>(sum);
                }
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

double layer_l2_loss(const FeatureMap& y_src, const FeatureMap& y_tgt) {
    if (!y_src.same_shape(y_tgt)) throw Error(ErrorCode::DimensionMismatch, "layer_l2_loss: shapes differ");
    double sum = 0.0;
    const auto a = y_src.data();
    const auto b = y_tgt.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        sum += d * d;
    }
    return sum;
}

double rowgroup_loss(const FeatureMap& y_src, const FeatureMap& y_tgt, const RowGroupPlan& plan) {
    if (!y_src.same_shape(y_tgt)) throw Error(ErrorCode::DimensionMismatch, "rowgroup_loss: shapes differ");
    if (plan.height != y_src.height()) {
        throw Error(ErrorCode::DimensionMismatch, "row-group plan height differs from feature map");
    }
    const std::size_t row_len = static_cast<std::size_t>(y_src.width()) * y_src.channels();
    double total = 0.0;
    for (int g = 0; g < plan.group_count(); ++g) {
        const RowRange core = plan.core_rows(g);
        double sum = 0.0;
        for (std::size_t i = core.start * row_len; i < core.end * row_len; ++i) {
            const double d = static_cast<double>(y_src.data()[i]) - y_tgt.data()[i];
            sum += d * d;
        }
        total += sum;
    }
    return total / plan.group_count();
}

}  // namespace flow360
