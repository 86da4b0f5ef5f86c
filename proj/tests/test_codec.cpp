#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dc/codec.hpp"

using namespace dc;

namespace {

// Grid with integer centers 1..8, handy for hand-checked cases.
BinGrid integer_grid() { return BinGrid(0.5, 8.5, 8); }

TEST(BinGrid, CentersAreUniformAndInsideRange) {
    BinGrid g = kitti_grid();
    EXPECT_EQ(g.n_bins(), 80);
    EXPECT_DOUBLE_EQ(g.bin_width(), 1.0);
    EXPECT_DOUBLE_EQ(g.center(0), 0.5);
    EXPECT_DOUBLE_EQ(g.center(79), 79.5);
    for (int j = 1; j < g.n_bins(); ++j)
        EXPECT_DOUBLE_EQ(g.center(j) - g.center(j - 1), g.bin_width());
    EXPECT_GE(g.center(0), g.d_min());
    EXPECT_LE(g.center(g.n_bins() - 1), g.d_max());
}

TEST(BinGrid, NyuDefault) {
    BinGrid g = nyu_grid();
    EXPECT_EQ(g.n_bins(), 80);
    EXPECT_NEAR(g.bin_width(), 0.1, 1e-15);
    EXPECT_NEAR(g.center(0), 0.05, 1e-15);
}

TEST(BinGrid, RejectsBadRanges) {
    EXPECT_THROW(BinGrid(5.0, 5.0, 10), Error);
    EXPECT_THROW(BinGrid(-1.0, 5.0, 10), Error);
    EXPECT_THROW(BinGrid(0.0, 5.0, 2), Error);
}

TEST(EncodePixel, HandEvaluatedTriple) {
    // d = 7.25 on {d_min=0, N=10, b=1}: nearest center D=7.5 (bin 7,
    // zero-based), delta = -0.25, coefficients (0.375, 0.5, 0.125).
    BinGrid g(0.0, 10.0, 10);
    DCVector v = encode_pixel(7.25, g);
    EXPECT_DOUBLE_EQ(v[6], 0.375);
    EXPECT_DOUBLE_EQ(v[7], 0.5);
    EXPECT_DOUBLE_EQ(v[8], 0.125);
    for (int j : {0, 1, 2, 3, 4, 5, 9}) EXPECT_EQ(v[j], 0.0);
    // Inner product with the centers reproduces the depth.
    EXPECT_DOUBLE_EQ(0.375 * 6.5 + 0.5 * 7.5 + 0.125 * 8.5, 7.25);
    EXPECT_DOUBLE_EQ(decode_all(v, g), 7.25);
}

TEST(EncodePixel, BinCenterIsSymmetric) {
    BinGrid g(0.0, 10.0, 10);
    DCVector v = encode_pixel(4.5, g);  // exactly at a center
    EXPECT_DOUBLE_EQ(v[3], 0.25);
    EXPECT_DOUBLE_EQ(v[4], 0.5);
    EXPECT_DOUBLE_EQ(v[5], 0.25);
}

TEST(EncodePixel, BinEdgeDropsOneNeighbor) {
    BinGrid g(0.0, 10.0, 10);
    // d = 5.0 sits on the edge between centers 4.5 and 5.5; ties round up,
    // so delta = -0.5 at the upper bin.
    DCVector v = encode_pixel(5.0, g);
    EXPECT_DOUBLE_EQ(v[4], 0.5);
    EXPECT_DOUBLE_EQ(v[5], 0.5);
    EXPECT_DOUBLE_EQ(v[6], 0.0);
    EXPECT_DOUBLE_EQ(decode_all(v, g), 5.0);
    EXPECT_DOUBLE_EQ(decode_3coeff(v, g), 5.0);
}

TEST(EncodePixel, ErrorsOnBadInput) {
    BinGrid g(0.0, 10.0, 10);
    EXPECT_THROW(encode_pixel(std::nan(""), g), Error);
    EXPECT_THROW(encode_pixel(-1.0, g), Error);
    EXPECT_THROW(encode_pixel(0.0, g), Error);
    try {
        encode_pixel(0.3, g);  // below the encodable span
        FAIL() << "expected range error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::out_of_range);
    }
    EXPECT_THROW(encode_pixel(9.7, g), Error);
}

TEST(EncodePixel, ClampSnapsIntoRange) {
    BinGrid g(0.0, 10.0, 10);
    DCVector lo = encode_pixel(0.2, g, /*clamp=*/true);
    EXPECT_DOUBLE_EQ(decode_all(lo, g), g.encodable_min());
    DCVector hi = encode_pixel(55.0, g, /*clamp=*/true);
    EXPECT_DOUBLE_EQ(decode_all(hi, g), g.encodable_max());
}

TEST(EncodePixel, SpanEndpointsEncodeExactly) {
    BinGrid g(0.0, 10.0, 10);
    for (double d : {g.encodable_min(), g.encodable_max()}) {
        DCVector v = encode_pixel(d, g);
        EXPECT_NEAR(decode_all(v, g), d, 1e-12);
        EXPECT_NEAR(decode_3coeff(v, g), d, 1e-12);
    }
}

TEST(DecodeAll, OneHotReturnsCenter) {
    BinGrid g = integer_grid();
    DCVector v(g.n_bins());
    v[4] = 1.0;
    EXPECT_DOUBLE_EQ(decode_all(v, g), g.center(4));
}

TEST(DecodeAll, BimodalAveragesToMixedDepth) {
    // Equal mass at depths 2 and 6 averages to 4: the mixed-depth failure
    // mode that peak decoding avoids.
    BinGrid g = integer_grid();
    DCVector v(g.n_bins());
    v[1] = 0.5;  // center 2
    v[5] = 0.5;  // center 6
    EXPECT_DOUBLE_EQ(decode_all(v, g), 4.0);
    EXPECT_DOUBLE_EQ(decode_3coeff(v, g), 2.0);  // tie resolves to the lower peak
}

TEST(DecodeAll, Errors) {
    BinGrid g = integer_grid();
    DCVector zero(g.n_bins());
    try {
        decode_all(zero, g);
        FAIL() << "expected missing-pixel error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::missing_pixel);
    }
    DCVector off(g.n_bins());
    off[2] = 0.7;  // sum far from 1
    try {
        decode_all(off, g);
        FAIL() << "expected normalization error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::normalization);
    }
    // A sum within 1e-6 of 1 is renormalized instead.
    DCVector close(g.n_bins());
    close[2] = 1.0 + 5e-7;
    EXPECT_DOUBLE_EQ(decode_all(close, g), g.center(2));
}

TEST(Decode3Coeff, PeakWinsOverDistantMass) {
    BinGrid g(0.0, 12.0, 12);
    DCVector v(g.n_bins());
    v[2] = 0.25;
    v[3] = 0.30;
    v[9] = 0.45;
    EXPECT_DOUBLE_EQ(decode_3coeff(v, g), g.center(9));
}

TEST(Decode3Coeff, BoundaryPeakUsesAvailableNeighbors) {
    BinGrid g = integer_grid();
    DCVector v(g.n_bins());
    v[0] = 1.0;
    EXPECT_DOUBLE_EQ(decode_3coeff(v, g), g.center(0));
    DCVector w(g.n_bins());
    w[g.n_bins() - 1] = 0.8;
    w[g.n_bins() - 2] = 0.2;
    double expect = (0.8 * g.center(7) + 0.2 * g.center(6));
    EXPECT_DOUBLE_EQ(decode_3coeff(w, g), expect);
}

TEST(Decode3Coeff, MissingPixelError) {
    BinGrid g = integer_grid();
    DCVector zero(g.n_bins());
    EXPECT_THROW(decode_3coeff(zero, g), Error);
}

TEST(Decode3Coeff, ScaleInvariance) {
    BinGrid g(0.0, 20.0, 20);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> depth(g.encodable_min(), g.encodable_max());
    std::uniform_real_distribution<double> scale(1e-6, 1e6);
    for (int i = 0; i < 200; ++i) {
        DCVector v = encode_pixel(depth(rng), g);
        const double s = scale(rng);
        DCVector w(g.n_bins());
        for (int j = 0; j < g.n_bins(); ++j) w[j] = v[j] * s;
        EXPECT_NEAR(decode_3coeff(v, g), decode_3coeff(w, g), 1e-9);
    }
}

TEST(Codec, RoundTripPropertyOverRandomGrids) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double d_min = u01(rng) * 5.0;
        const double d_max = d_min + 1.0 + u01(rng) * 100.0;
        const int n = 4 + static_cast<int>(u01(rng) * 120);
        BinGrid g(d_min, d_max, n);
        std::uniform_real_distribution<double> depth(g.encodable_min(), g.encodable_max());
        for (int i = 0; i < 200; ++i) {
            const double d = depth(rng);
            DCVector v = encode_pixel(d, g);
            double sum = 0.0;
            for (int j = 0; j < g.n_bins(); ++j) {
                ASSERT_GE(v[j], 0.0);
                sum += v[j];
            }
            ASSERT_NEAR(sum, 1.0, 1e-12);
            ASSERT_NEAR(decode_all(v, g), d, 1e-9);
            ASSERT_NEAR(decode_3coeff(v, g), d, 1e-9);
            const double peak = decode_3coeff(v, g);
            ASSERT_GE(peak, g.d_min());
            ASSERT_LE(peak, g.d_max());
        }
    }
}

TEST(Decode3Coeff, AlwaysInsideGridRange) {
    BinGrid g(0.0, 16.0, 16);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        DCVector v(g.n_bins());
        for (int j = 0; j < g.n_bins(); ++j) v[j] = u01(rng) < 0.3 ? u01(rng) : 0.0;
        if (v.is_missing()) v[trial % g.n_bins()] = 0.5;
        const double d = decode_3coeff(v, g);
        ASSERT_GE(d, g.d_min());
        ASSERT_LE(d, g.d_max());
    }
}

TEST(EncodeImage, MissingAndPresentPixels) {
    BinGrid g(0.0, 10.0, 10);
    DepthImage img(3, 4);
    img.set(1, 2, 4.5);  // a bin center
    DCImage dc = encode_image(img, g);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c)
            if (r != 1 || c != 2) EXPECT_TRUE(dc.pixel_missing(r, c));
    auto px = dc.pixel(1, 2);
    EXPECT_DOUBLE_EQ(px[3], 0.25);
    EXPECT_DOUBLE_EQ(px[4], 0.5);
    EXPECT_DOUBLE_EQ(px[5], 0.25);
}

TEST(EncodeImage, AllMissingStaysAllZero) {
    BinGrid g(0.0, 10.0, 10);
    DepthImage img(4, 4);
    DCImage dc = encode_image(img, g);
    for (double v : dc.data()) EXPECT_EQ(v, 0.0);
}

TEST(EncodeImage, ErrorCarriesPixelCoordinates) {
    BinGrid g(0.0, 10.0, 10);
    DepthImage img(2, 2);
    img.set(1, 0, 0.2);  // below the encodable span
    try {
        encode_image(img, g);
        FAIL() << "expected range error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::out_of_range);
        EXPECT_NE(std::string(e.what()).find("(1,0)"), std::string::npos);
    }
}

TEST(DecodeImage, RoundTripReproducesDepths) {
    BinGrid g(0.0, 40.0, 40);
    DepthImage img(6, 5);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> depth(g.encodable_min(), g.encodable_max());
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            if (u01(rng) < 0.6) img.set(r, c, depth(rng));
    DCImage dc = encode_image(img, g);
    for (DecodeMode mode : {DecodeMode::all, DecodeMode::three_coeff}) {
        DepthImage back = decode_image(dc, mode);
        for (int r = 0; r < img.height(); ++r) {
            for (int c = 0; c < img.width(); ++c) {
                ASSERT_EQ(back.present(r, c), img.present(r, c));
                if (img.present(r, c)) ASSERT_NEAR(back.at(r, c), img.at(r, c), 1e-9);
            }
        }
    }
}

TEST(DepthImage, SetValidatesValues) {
    DepthImage img(2, 2);
    EXPECT_THROW(img.set(0, 0, 0.0), Error);
    EXPECT_THROW(img.set(0, 0, -2.0), Error);
    EXPECT_THROW(img.set(0, 0, std::nan("")), Error);
    img.set(0, 0, 3.25);
    EXPECT_TRUE(img.present(0, 0));
    EXPECT_DOUBLE_EQ(img.at(0, 0), 3.25);
    img.clear(0, 0);
    EXPECT_FALSE(img.present(0, 0));
    EXPECT_EQ(img.present_count(), 0u);
}

TEST(DepthImage, CropTopDropsRows) {
    DepthImage img(5, 3);
    img.set(0, 0, 1.0);
    img.set(4, 2, 2.0);
    DepthImage cropped = crop_top(img, 2);
    EXPECT_EQ(cropped.height(), 3);
    EXPECT_FALSE(cropped.present(0, 0));
    EXPECT_TRUE(cropped.present(2, 2));
    EXPECT_DOUBLE_EQ(cropped.at(2, 2), 2.0);
}

}  // namespace
