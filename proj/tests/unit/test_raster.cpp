#include <cmath>

#include <gtest/gtest.h>

#include "flow360/error.hpp"
#include "flow360/raster.hpp"
#include "gen.hpp"

using namespace flow360;

namespace {

constexpr EdgePolicy kWrapClamp{HorizontalEdge::Wrap, VerticalEdge::Clamp};
constexpr EdgePolicy kWrapReflect{HorizontalEdge::Wrap, VerticalEdge::ReflectShift};
constexpr EdgePolicy kClampClamp{HorizontalEdge::Clamp, VerticalEdge::Clamp};

Image ramp(int h, int w) {
    Image img(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x) = static_cast<float>(y * w + x);
    return img;
}

}  // namespace

TEST(Image, RejectsBadShapes) {
    EXPECT_THROW(Image(0, 4, 3), Error);
    EXPECT_THROW(Image(4, 0, 1), Error);
    EXPECT_THROW(Image(4, 4, 2), Error);
    EXPECT_THROW(FlowField(0, 3), Error);
}

TEST(Bilinear, IntegerPositionsAreExact) {
    gen::Rng rng(1);
    const Image img = gen::image(rng, 7, 9, 3);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 9; ++x) {
            const Pixel p = bilinear_sample(img, x, y, kWrapClamp);
            for (int c = 0; c < 3; ++c) EXPECT_EQ(p[c], img.at(y, x, c));
        }
    }
}

TEST(Bilinear, MatchesWeightedAverageOracle) {
    gen::Rng rng(2);
    const Image img = gen::image(rng, 6, 8, 1);
    for (int t = 0; t < 200; ++t) {
        const double x = gen::real_in(rng, 0.0, 6.999);
        const double y = gen::real_in(rng, 0.0, 4.999);
        const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
        const double ax = x - x0, ay = y - y0;
        const double expect = (1 - ax) * (1 - ay) * img.at(y0, x0) + ax * (1 - ay) * img.at(y0, x0 + 1) +
                              (1 - ax) * ay * img.at(y0 + 1, x0) + ax * ay * img.at(y0 + 1, x0 + 1);
        EXPECT_NEAR(bilinear_sample(img, x, y, kWrapClamp)[0], expect, 1e-6);
    }
}

TEST(Bilinear, HorizontalWrapBlendsAcrossSeam) {
    const Image img = ramp(3, 4);
    // halfway between the last column and column 0
    EXPECT_FLOAT_EQ(bilinear_sample(img, 3.5, 1, kWrapClamp)[0], 0.5f * (7 + 4));
    EXPECT_FLOAT_EQ(bilinear_sample(img, -1.0, 1, kWrapClamp)[0], 7.0f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, 4.0, 2, kWrapClamp)[0], 8.0f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, -0.5, 0, kClampClamp)[0], 0.0f);
}

TEST(Bilinear, VerticalPolicies) {
    const Image img = ramp(3, 4);
    EXPECT_FLOAT_EQ(bilinear_sample(img, 1, -1, kWrapClamp)[0], 1.0f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, 1, 5, kWrapClamp)[0], 9.0f);
    // row -1 is row 0 seen across the pole: column shifted by w/2
    EXPECT_FLOAT_EQ(bilinear_sample(img, 1, -1, kWrapReflect)[0], 3.0f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, 3, 3, kWrapReflect)[0], 8.0f + 1.0f);
}

TEST(Bilinear, NonFiniteCoordinatesStayInBounds) {
    const Image img = ramp(3, 4);
    const Pixel p = bilinear_sample(img, std::nan(""), 1e300, kWrapClamp);
    EXPECT_TRUE(std::isfinite(p[0]));
}

TEST(ResizeNearest, MatchesCentreSamplingOracle) {
    gen::Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const int h = gen::int_in(rng, 1, 12), w = gen::int_in(rng, 1, 12);
        const int oh = gen::int_in(rng, 1, 20), ow = gen::int_in(rng, 1, 20);
        const Image img = gen::image(rng, h, w, 3);
        const Image out = resize_nearest(img, oh, ow);
        ASSERT_EQ(out.height(), oh);
        ASSERT_EQ(out.width(), ow);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const int sy = static_cast<int>(std::floor((y + 0.5) * h / oh));
                const int sx = static_cast<int>(std::floor((x + 0.5) * w / ow));
                for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(y, x, c), img.at(sy, sx, c));
            }
        }
    }
}

TEST(ResizeNearest, IdentitySizeIsExact) {
    gen::Rng rng(4);
    const Image img = gen::image(rng, 5, 10, 3);
    EXPECT_EQ(resize_nearest(img, 5, 10), img);
}

TEST(ResizeNearest, FlowVectorsAreRescaled) {
    FlowField f(4, 4, 1.0f, 2.0f);
    const FlowField r = resize_nearest(f, 8, 16);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 16; ++x) {
            EXPECT_FLOAT_EQ(r.u(y, x), 4.0f);
            EXPECT_FLOAT_EQ(r.v(y, x), 4.0f);
        }
    }
}
