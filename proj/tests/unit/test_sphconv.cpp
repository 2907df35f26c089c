#include <cmath>

#include <gtest/gtest.h>

#include "flow360/error.hpp"
#include "flow360/sphconv.hpp"
#include "flow360/sphere.hpp"
#include "gen.hpp"

using namespace flow360;

namespace {

// Direct loop over an explicitly padded copy of the input.
FeatureMap conv_oracle(const FeatureMap& x, const Kernel& k, Padding padding) {
    const int h = x.height(), w = x.width(), ph = k.kh() / 2, pw = k.kw() / 2;
    auto padded = [&](int r, int c, int ch) -> double {
        if (padding == Padding::Zero) {
            if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
            return x.at(r, c, ch);
        }
        if (r < 0) {
            r = std::min(-r - 1, h - 1);
            c += w / 2;
        } else if (r >= h) {
            r = std::max(2 * h - 1 - r, 0);
            c += w / 2;
        }
        c = ((c % w) + w) % w;
        return x.at(r, c, ch);
    };
    FeatureMap y(h, w, k.c_out());
    for (int co = 0; co < k.c_out(); ++co)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double s = 0;
                for (int ci = 0; ci < k.c_in(); ++ci)
                    for (int a = 0; a < k.kh(); ++a)
                        for (int b = 0; b < k.kw(); ++b) {
                            const int r = i + a - ph, c = j + b - pw;
                            if (padding == Padding::Zero && (r < 0 || r >= h || c < 0 || c >= w)) continue;
                            s += double(k.at(co, ci, a, b)) * padded(r, c, ci);
                        }
                y.at(i, j, co) = static_cast<float>(s);
            }
    return y;
}

FeatureMap shift_columns(const FeatureMap& x, int s) {
    FeatureMap y(x.height(), x.width(), x.channels());
    for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j)
            for (int c = 0; c < x.channels(); ++c) y.at(i, (j + s) % x.width(), c) = x.at(i, j, c);
    return y;
}

}  // namespace

TEST(Kernel, ShapeValidation) {
    EXPECT_THROW(Kernel(2, 3, 1, 1), Error);
    EXPECT_THROW(Kernel(3, 3, 0, 1), Error);
    EXPECT_THROW(FeatureMap(0, 3, 1), Error);
    Kernel k(3, 5, 2, 4);
    EXPECT_EQ(k.data().size(), 3u * 5 * 2 * 4);
    k.at(3, 1, 2, 4) = 7.0f;
    EXPECT_EQ(k.slice(3, 1)[2 * 5 + 4], 7.0f);
}

TEST(Conv2d, IdentityKernel) {
    gen::Rng rng(70);
    const FeatureMap x = gen::features(rng, 5, 8, 3);
    Kernel k(1, 1, 3, 3);
    for (int c = 0; c < 3; ++c) k.at(c, c, 0, 0) = 1.0f;
    EXPECT_EQ(conv2d(x, k, Padding::Zero), x);
    EXPECT_EQ(conv2d(x, k, Padding::HorizontalWrap), x);
}

TEST(Conv2d, AllOnesOnConstantWithWrapPaddingIsNine) {
    const FeatureMap x(6, 12, 1, 1.0f);
    const FeatureMap y = conv2d(x, Kernel(3, 3, 1, 1, 1.0f), Padding::HorizontalWrap);
    for (float v : y.data()) EXPECT_EQ(v, 9.0f);
    const FeatureMap z = conv2d(x, Kernel(3, 3, 1, 1, 1.0f), Padding::Zero);
    EXPECT_EQ(z.at(0, 0, 0), 4.0f);
    EXPECT_EQ(z.at(2, 5, 0), 9.0f);
}

TEST(Conv2d, MatchesLoopOracleExactly) {
    gen::Rng rng(71);
    for (int t = 0; t < 40; ++t) {
        const int h = gen::int_in(rng, 1, 10), w = 2 * gen::int_in(rng, 1, 8);
        const int kh = 2 * gen::int_in(rng, 0, 2) + 1, kw = 2 * gen::int_in(rng, 0, 2) + 1;
        const int ci = gen::int_in(rng, 1, 3), co = gen::int_in(rng, 1, 3);
        const FeatureMap x = gen::features(rng, h, w, ci);
        const Kernel k = gen::kernel(rng, kh, kw, ci, co);
        for (Padding p : {Padding::Zero, Padding::HorizontalWrap}) {
            const FeatureMap expect = conv_oracle(x, k, p);
            ASSERT_EQ(conv2d(x, k, p, Exec::Serial), expect);
            ASSERT_EQ(conv2d(x, k, p, Exec::Parallel), expect);
        }
    }
}

TEST(Conv2d, SeamEquivariance) {
    gen::Rng rng(72);
    for (int t = 0; t < 10; ++t) {
        const FeatureMap x = gen::features(rng, 7, 14, 2);
        const Kernel k = gen::kernel(rng, 3, 5, 2, 2);
        for (int s : {1, 5, 13}) {
            EXPECT_EQ(conv2d(shift_columns(x, s), k, Padding::HorizontalWrap),
                      shift_columns(conv2d(x, k, Padding::HorizontalWrap), s));
        }
    }
}

TEST(Conv2d, ChannelMismatch) {
    EXPECT_THROW(conv2d(FeatureMap(4, 4, 2), Kernel(3, 3, 3, 1), Padding::Zero), Error);
}

TEST(RowGroupPartition, Examples) {
    auto p = rowgroup_partition(8, 4, 3);
    ASSERT_EQ(p.group_count(), 2);
    EXPECT_EQ(p.ranges[0], (RowRange{0, 7}));
    EXPECT_EQ(p.ranges[1], (RowRange{4, 8}));
    p = rowgroup_partition(8, 8, 3);
    ASSERT_EQ(p.group_count(), 1);
    EXPECT_EQ(p.ranges[0], (RowRange{0, 8}));
    p = rowgroup_partition(6, 2, 0);
    ASSERT_EQ(p.group_count(), 3);
    EXPECT_EQ(p.ranges[0], (RowRange{0, 2}));
    EXPECT_EQ(p.ranges[1], (RowRange{2, 4}));
    EXPECT_EQ(p.ranges[2], (RowRange{4, 6}));
    EXPECT_THROW(rowgroup_partition(8, 3, 0), Error);
    EXPECT_THROW(rowgroup_partition(8, 4, -1), Error);
    EXPECT_THROW(rowgroup_partition(8, 2, 3), Error);
}

TEST(RowGroupPartition, InvariantsOverAllDivisorPairs) {
    for (int h = 1; h <= 64; ++h) {
        for (int ng = 1; ng <= h; ++ng) {
            if (h % ng) continue;
            for (int nl = 0; nl <= ng; ++nl) {
                const RowGroupPlan p = rowgroup_partition(h, ng, nl);
                const int n = p.group_count();
                ASSERT_EQ(n, h / ng);
                std::vector<int> cover(h, 0);
                for (int g = 0; g < n; ++g) {
                    const RowRange r = p.ranges[g];
                    ASSERT_EQ(r.start, g * ng);
                    ASSERT_EQ(r.end - r.start, g < n - 1 ? ng + nl : ng);
                    for (int i = r.start; i < r.end; ++i) ++cover[i];
                    if (g + 1 < n) ASSERT_EQ(r.end - p.ranges[g + 1].start, nl);
                }
                for (int i = 0; i < h; ++i) ASSERT_GE(cover[i], 1);
                ASSERT_EQ(p.ranges.back().end, h);
            }
        }
    }
}

TEST(InterleavedConv, IdenticalKernelsEqualConv2d) {
    gen::Rng rng(73);
    for (int t = 0; t < 30; ++t) {
        const int ng = gen::int_in(rng, 1, 6), groups = gen::int_in(rng, 1, 5);
        const int h = ng * groups, w = 2 * gen::int_in(rng, 1, 10);
        const int nl = gen::int_in(rng, 0, ng);
        const FeatureMap x = gen::features(rng, h, w, 2);
        const Kernel k = gen::kernel(rng, 3, 3, 2, 3);
        const std::vector<Kernel> ks(groups, k);
        const RowGroupPlan plan = rowgroup_partition(h, ng, nl);
        for (Padding p : {Padding::Zero, Padding::HorizontalWrap}) {
            const FeatureMap ref = conv2d(x, k, p);
            ASSERT_EQ(interleaved_conv(x, ks, plan, p, Exec::Serial), ref);
            ASSERT_EQ(interleaved_conv(x, ks, plan, p, Exec::Parallel), ref);
        }
    }
}

TEST(InterleavedConv, NoInterleaveIsPerGroupSlicing) {
    gen::Rng rng(74);
    const int ng = 3, groups = 4, h = 12, w = 16;
    const FeatureMap x = gen::features(rng, h, w, 2);
    std::vector<Kernel> ks;
    for (int g = 0; g < groups; ++g) ks.push_back(gen::kernel(rng, 3, 3, 2, 2));
    const FeatureMap y = interleaved_conv(x, ks, rowgroup_partition(h, ng, 0), Padding::HorizontalWrap);
    for (int g = 0; g < groups; ++g) {
        const FeatureMap ref = conv2d(x, ks[g], Padding::HorizontalWrap);
        for (int i = g * ng; i < (g + 1) * ng; ++i)
            for (int j = 0; j < w; ++j)
                for (int c = 0; c < 2; ++c) ASSERT_EQ(y.at(i, j, c), ref.at(i, j, c));
    }
}

TEST(InterleavedConv, OverlapBlendsLinearly) {
    const int ng = 4, nl = 3, h = 8, w = 8;
    gen::Rng rng(75);
    const Kernel k = gen::kernel(rng, 3, 3, 1, 1);
    Kernel k2 = k;
    for (float& v : k2.data()) v *= 2.0f;
    const FeatureMap x(h, w, 1, 1.0f);
    const double base = conv2d(x, k, Padding::HorizontalWrap).at(0, 0, 0);
    const std::vector<Kernel> ks = {k, k2};
    const FeatureMap y = interleaved_conv(x, ks, rowgroup_partition(h, ng, nl), Padding::HorizontalWrap);
    for (int i = 0; i < h; ++i) {
        double expect = i < ng ? base : 2 * base;
        if (i >= ng && i < ng + nl) expect = base * (1.0 + (i - ng + 1.0) / (nl + 1));
        for (int j = 0; j < w; ++j) EXPECT_NEAR(y.at(i, j, 0), expect, 1e-6);
    }
    const RowBlend b = row_blend(rowgroup_partition(h, ng, nl), 5);
    EXPECT_EQ(b.first, 0);
    EXPECT_EQ(b.second, 1);
    EXPECT_DOUBLE_EQ(b.weight, 0.5);
}

TEST(InterleavedConv, RejectsWrongKernelCount) {
    const std::vector<Kernel> ks(3, Kernel(3, 3, 1, 1));
    EXPECT_THROW(interleaved_conv(FeatureMap(8, 8, 1), ks, rowgroup_partition(8, 4, 1), Padding::Zero), Error);
    const std::vector<Kernel> mixed = {Kernel(3, 3, 1, 1), Kernel(5, 5, 1, 1)};
    EXPECT_THROW(interleaved_conv(FeatureMap(8, 8, 1), mixed, rowgroup_partition(8, 4, 1), Padding::Zero), Error);
}

TEST(ApplyProjection, IdentityDoubleAndBruteForce) {
    gen::Rng rng(76);
    const Kernel k = gen::kernel(rng, 3, 3, 2, 3);
    const auto id = ProjectionMatrixSet::identity(3, 3, 3, 3, 3);
    for (const Kernel& t : apply_projection(id, k)) EXPECT_EQ(t, k);

    ProjectionMatrixSet twice = id;
    for (auto& m : twice.matrices)
        for (float& c : m.coeffs) c *= 2.0f;
    for (const Kernel& t : apply_projection(twice, k))
        for (std::size_t i = 0; i < k.data().size(); ++i) EXPECT_EQ(t.data()[i], 2.0f * k.data()[i]);

    ProjectionMatrix p{5, 3, 3, 3, {}};
    p.coeffs.resize(15 * 9);
    for (float& c : p.coeffs) c = static_cast<float>(gen::real_in(rng, -1, 1));
    const auto out = apply_projection(ProjectionMatrixSet{{p}}, k);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].kh(), 5);
    EXPECT_EQ(out[0].kw(), 3);
    for (int co = 0; co < 3; ++co)
        for (int ci = 0; ci < 2; ++ci)
            for (int r = 0; r < 15; ++r) {
                double s = 0;
                for (int c = 0; c < 9; ++c) s += double(p.at(r, c)) * k.at(co, ci, c / 3, c % 3);
                EXPECT_NEAR(out[0].at(co, ci, r / 3, r % 3), s, 1e-6);
            }
    EXPECT_THROW(apply_projection(ProjectionMatrixSet::identity(1, 3, 3, 5, 5), k), Error);
}

TEST(ApplyProjection, IdentityEmbeddingBetweenSizes) {
    const auto up = ProjectionMatrix::identity(5, 5, 3, 3);
    Kernel k(3, 3, 1, 1);
    for (int i = 0; i < 9; ++i) k.data()[i] = static_cast<float>(i + 1);
    const Kernel big = apply_projection(ProjectionMatrixSet{{up}}, k)[0];
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            const bool inner = y >= 1 && y <= 3 && x >= 1 && x <= 3;
            EXPECT_EQ(big.at(0, 0, y, x), inner ? k.at(0, 0, y - 1, x - 1) : 0.0f);
        }
}

TEST(ApplyProjection, LinearInBothArguments) {
    gen::Rng rng(77);
    const Kernel k1 = gen::kernel(rng, 3, 3, 1, 2), k2 = gen::kernel(rng, 3, 3, 1, 2);
    ProjectionMatrixSet p1 = ProjectionMatrixSet::identity(2, 3, 3, 3, 3), p2 = p1;
    for (auto* set : {&p1, &p2})
        for (auto& m : set->matrices)
            for (float& c : m.coeffs) c = static_cast<float>(gen::real_in(rng, -1, 1));
    Kernel ksum = k1;
    for (std::size_t i = 0; i < ksum.data().size(); ++i) ksum.data()[i] += k2.data()[i];
    ProjectionMatrixSet psum = p1;
    for (int g = 0; g < 2; ++g)
        for (std::size_t i = 0; i < psum.matrices[g].coeffs.size(); ++i) psum.matrices[g].coeffs[i] += p2.matrices[g].coeffs[i];
    const auto a = apply_projection(p1, ksum), b1 = apply_projection(p1, k1), b2 = apply_projection(p1, k2);
    const auto c = apply_projection(psum, k1), d1 = apply_projection(p1, k1), d2 = apply_projection(p2, k1);
    for (int g = 0; g < 2; ++g)
        for (std::size_t i = 0; i < a[g].data().size(); ++i) {
            EXPECT_NEAR(a[g].data()[i], b1[g].data()[i] + b2[g].data()[i], 1e-5);
            EXPECT_NEAR(c[g].data()[i], d1[g].data()[i] + d2[g].data()[i], 1e-5);
        }
}

TEST(Losses, LayerL2) {
    gen::Rng rng(78);
    const FeatureMap a = gen::features(rng, 4, 6, 2);
    EXPECT_EQ(layer_l2_loss(a, a), 0.0);
    FeatureMap b = a;
    for (float& v : b.data()) v += 1.0f;
    EXPECT_NEAR(layer_l2_loss(a, b), 48.0, 1e-5);
    FeatureMap a3 = a, b3 = b;
    for (float& v : a3.data()) v *= 4.0f;
    for (float& v : b3.data()) v *= 4.0f;
    EXPECT_NEAR(layer_l2_loss(a3, b3), 16.0 * layer_l2_loss(a, b), 1e-12);
    EXPECT_THROW(layer_l2_loss(a, FeatureMap(4, 6, 1)), Error);
}

TEST(Losses, RowGroupMean) {
    gen::Rng rng(79);
    const FeatureMap a = gen::features(rng, 4, 6, 1);
    EXPECT_EQ(rowgroup_loss(a, a, rowgroup_partition(4, 2, 1)), 0.0);
    FeatureMap b = gen::features(rng, 4, 6, 1);
    EXPECT_DOUBLE_EQ(rowgroup_loss(a, b, rowgroup_partition(4, 4, 3)), layer_l2_loss(a, b));

    FeatureMap z(2, 2, 1), e(2, 2, 1);
    e.at(0, 0, 0) = std::sqrt(2.0f);  // group 0 loss 2
    e.at(1, 0, 0) = 2.0f;             // group 1 loss 4
    EXPECT_NEAR(rowgroup_loss(e, z, rowgroup_partition(2, 1, 1)), 3.0, 1e-6);
}

TEST(FeatureProjection, MatchesImageProjection) {
    gen::Rng rng(80);
    const Image img = gen::image(rng, 8, 16, 3);
    const FeatureMap f = FeatureMap::from_image(img);
    const FeatureMap pf = project_omega(f);
    const Image pi = project_omega(img);
    for (std::size_t i = 0; i < pi.data().size(); ++i) EXPECT_EQ(pf.data()[i], pi.data()[i]);
    EXPECT_THROW(project_omega(FeatureMap(4, 4, 2)), Error);
}

TEST(Containers, RoundTripsAreBitExact) {
    gen::Rng rng(81);
    for (int t = 0; t < 20; ++t) {
        const Kernel k = gen::kernel(rng, 2 * gen::int_in(rng, 0, 3) + 1, 2 * gen::int_in(rng, 0, 3) + 1, gen::int_in(rng, 1, 4), gen::int_in(rng, 1, 4));
        const auto kb = encode_kernel(k);
        EXPECT_EQ(decode_kernel(kb), k);
        EXPECT_EQ(encode_kernel(decode_kernel(kb)), kb);

        ProjectionMatrixSet p = ProjectionMatrixSet::identity(gen::int_in(rng, 1, 5), 5, 3, k.kh(), k.kw());
        for (auto& m : p.matrices)
            for (float& c : m.coeffs) c = static_cast<float>(gen::real_in(rng, -2, 2));
        EXPECT_EQ(decode_projections(encode_projections(p)), p);

        std::vector<FeatureMap> batch;
        const int h = gen::int_in(rng, 1, 6), w = gen::int_in(rng, 1, 6), c = gen::int_in(rng, 1, 4);
        for (int b = gen::int_in(rng, 1, 3); b > 0; --b) batch.push_back(gen::features(rng, h, w, c));
        EXPECT_EQ(decode_feature_batch(encode_feature_batch(batch)), batch);
    }
}

TEST(Containers, LayoutAndCorruption) {
    Kernel k(1, 1, 1, 1, 1.0f);
    const auto bytes = encode_kernel(k);
    ASSERT_EQ(bytes.size(), 4u + 16 + 4);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "F3KN");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[20], 0x00);
    EXPECT_EQ(bytes[23], 0x3f);  // 1.0f little-endian: 00 00 80 3f

    auto expect_code = [](auto fn, ErrorCode code) {
        try {
            fn();
            ADD_FAILURE() << "no error";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), code);
        }
    };
    auto bad = bytes;
    bad[0] = 'X';
    expect_code([&] { decode_kernel(bad); }, ErrorCode::BadMagic);
    expect_code([&] { decode_kernel(std::span(bytes).first(bytes.size() - 1)); }, ErrorCode::TruncatedFile);
    auto longer = bytes;
    longer.push_back(1);
    expect_code([&] { decode_kernel(longer); }, ErrorCode::TrailingData);
    auto even = bytes;
    even[4] = 2;
    expect_code([&] { decode_kernel(even); }, ErrorCode::MalformedHeader);
    expect_code([&] { decode_projections(bytes); }, ErrorCode::BadMagic);
}
