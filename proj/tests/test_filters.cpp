#include <gtest/gtest.h>

#include <numbers>

#include "dicseg/filters.hpp"
#include "dicseg/phantom.hpp"
#include "oracles.hpp"

using namespace dicseg;

namespace {

double max_abs_diff(const GrayImage& a, const GrayImage& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.pixels()[i] - b.pixels()[i]));
    return d;
}

}  // namespace

TEST(Reflect, HalfSampleSymmetric) {
    EXPECT_EQ(reflect_index(-1, 5), 0);
    EXPECT_EQ(reflect_index(-2, 5), 1);
    EXPECT_EQ(reflect_index(5, 5), 4);
    EXPECT_EQ(reflect_index(6, 5), 3);
    for (int i = -12; i < 20; ++i) EXPECT_EQ(reflect_index(i, 4), oracle::mirror(i, 4)) << i;
}

TEST(GNeighbor, ThresholdAndSmoothMatchWindowScan) {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> dim(3, 32);
    for (int trial = 0; trial < 120; ++trial) {
        const auto img = oracle::random_image(rng, dim(rng), dim(rng));
        const double t = g_neighbor_threshold(img);
        EXPECT_NEAR(t, oracle::g_threshold(img), 1e-9);
        EXPECT_LE(max_abs_diff(g_neighbor_smooth(img), oracle::g_smooth(img, t)), 1e-9);
    }
}

TEST(GNeighbor, OverrideReplacesTheEstimatedBound) {
    std::mt19937_64 rng(5);
    const auto img = oracle::random_image(rng, 9, 7);
    EXPECT_LE(max_abs_diff(g_neighbor_smooth(img, {0.2}), oracle::g_smooth(img, 0.2)), 1e-12);
    EXPECT_EQ(g_neighbor_smooth(img, {0.0}), img);
}

TEST(GNeighbor, ConstantImageIsAFixedPoint) {
    const GrayImage img(8, 6, 0.3);
    EXPECT_EQ(g_neighbor_threshold(img), 0.0);
    EXPECT_EQ(g_neighbor_smooth(img), img);
}

TEST(GNeighbor, RejectsTinyImages) {
    EXPECT_THROW(g_neighbor_threshold(GrayImage(2, 5)), ShapeError);
}

TEST(Kuwahara, MatchesQuadrantScan) {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> dim(6, 32);
    for (int trial = 0; trial < 120; ++trial) {
        const int window = trial % 3 == 0 ? 7 : 5;
        int w = dim(rng), h = dim(rng);
        w = std::max(w, window + 1);
        h = std::max(h, window + 1);
        const auto img = oracle::random_image(rng, w, h);
        EXPECT_LE(max_abs_diff(kuwahara(img, window), oracle::kuwahara(img, window)), 1e-9);
    }
}

TEST(Kuwahara, PreservesAStepEdge) {
    GrayImage img(12, 12, 0.0);
    for (int y = 0; y < 12; ++y)
        for (int x = 6; x < 12; ++x) img(x, y) = 1.0;
    EXPECT_EQ(kuwahara(img, 5), img);
}

TEST(Kuwahara, ValidatesWindow) {
    const GrayImage img(10, 10, 0.0);
    EXPECT_THROW(kuwahara(img, 4), ParameterError);
    EXPECT_THROW(kuwahara(img, 3), ParameterError);
    EXPECT_THROW(kuwahara(img, 11), ParameterError);
}

TEST(LocalStddev, MatchesWindowScan) {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> dim(3, 32);
    for (int trial = 0; trial < 120; ++trial) {
        const int window = trial % 4 == 0 ? 5 : 3;
        const auto img = oracle::random_image(rng, dim(rng), dim(rng));
        EXPECT_LE(max_abs_diff(local_stddev(img, window), oracle::local_stddev(img, window)), 1e-9);
    }
}

TEST(LocalStddev, FlatImageIsZero) {
    const auto sd = local_stddev(GrayImage(6, 6, 0.4));
    for (double v : sd.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(FlatField, RemovesALinearRampAroundACell) {
    const int n = 480;
    GrayImage ramp(n, n);
    GrayImage flat(n, n);
    const auto disk = phantom::disk_mask(n, n, n / 2, n / 2, 25);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double cell = disk(x, y) ? 0.2 : 0.0;
            flat(x, y) = 0.3 + cell;
            ramp(x, y) = 0.3 + cell + 0.4 * (x + y) / (2.0 * n);
        }
    }
    // Deviation caused by the ramp, before and after correction, away from the border.
    auto shading = [&](const GrayImage& a, const GrayImage& b) {
        double worst = 0.0;
        for (int y = 120; y < n - 120; ++y)
            for (int x = 120; x < n - 120; ++x) worst = std::max(worst, std::abs(a(x, y) - b(x, y)));
        return worst;
    };
    const FlatFieldParams p{3.0, 40.0};
    const double before = shading(normalize(ramp), normalize(flat));
    const double after = shading(flat_field_correct(normalize(ramp), p), flat_field_correct(normalize(flat), p));
    EXPECT_GT(before, 10.0 * after) << before << " vs " << after;
}

TEST(FlatField, ConstantImageIsAllZero) {
    const auto out = flat_field_correct(GrayImage(30, 20, 0.6), {});
    for (double v : out.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(FlatField, ValidatesSigmas) {
    EXPECT_THROW(FlatFieldParams({5.0, 5.0}).validate(), ParameterError);
    EXPECT_THROW(FlatFieldParams({0.0, 5.0}).validate(), ParameterError);
}

TEST(BandPass, ResponseShape) {
    const BandPassParams p{65.5, 0.8688};
    EXPECT_EQ(bandpass_response(0.0, p), 0.0);
    EXPECT_NEAR(bandpass_response(10.0, p),
                std::exp(-100.0 / (2 * 65.5 * 65.5)) - std::exp(-100.0 / (2 * 0.8688 * 0.8688)), 1e-15);
    EXPECT_EQ(bandpass_response(0.0, {10.0, 0.0}), 0.0);
    EXPECT_EQ(bandpass_response(3.0, {10.0, 0.0}), std::exp(-9.0 / 200.0));
}

TEST(BandPass, ConstantImageGivesZero) {
    for (auto [w, h] : {std::pair{16, 12}, std::pair{15, 9}}) {
        const auto out = fft_bandpass_unnormalized(GrayImage(w, h, 0.37), {20.0, 1.0});
        for (double v : out.pixels()) EXPECT_LE(std::abs(v), 1e-9);
        const auto normalized = fft_bandpass(GrayImage(w, h, 0.37), {20.0, 1.0});
        for (double v : normalized.pixels()) EXPECT_EQ(v, 0.0);
    }
}

TEST(BandPass, CosineIsScaledByTheResponse) {
    const int w = 64, h = 48;
    const BandPassParams p{12.0, 2.5};
    for (auto [u0, v0] : {std::pair{3, 0}, std::pair{5, 7}, std::pair{-4, 2}, std::pair{20, 15}}) {
        GrayImage img(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img(x, y) = std::cos(2 * std::numbers::pi * (static_cast<double>(u0) * x / w + static_cast<double>(v0) * y / h));
        const double gain = bandpass_response(std::hypot(u0, v0), p);
        const auto out = fft_bandpass_unnormalized(img, p);
        for (std::size_t i = 0; i < img.size(); ++i) {
            ASSERT_NEAR(out.pixels()[i], gain * img.pixels()[i], 1e-6) << u0 << "," << v0;
        }
    }
}

TEST(BandPass, IsLinear) {
    std::mt19937_64 rng(404);
    const BandPassParams p{8.0, 1.5};
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = oracle::random_image(rng, 24, 17);
        const auto b = oracle::random_image(rng, 24, 17);
        GrayImage sum(24, 17);
        for (std::size_t i = 0; i < sum.size(); ++i) sum.pixels()[i] = 2.0 * a.pixels()[i] - 0.5 * b.pixels()[i];
        const auto fa = fft_bandpass_unnormalized(a, p);
        const auto fb = fft_bandpass_unnormalized(b, p);
        const auto fs = fft_bandpass_unnormalized(sum, p);
        for (std::size_t i = 0; i < sum.size(); ++i) {
            ASSERT_NEAR(fs.pixels()[i], 2.0 * fa.pixels()[i] - 0.5 * fb.pixels()[i], 1e-6);
        }
    }
}

TEST(BandPass, ValidatesRadii) {
    const GrayImage img(8, 8, 0.0);
    EXPECT_THROW(fft_bandpass(img, {1.0, 1.0}), ParameterError);
    EXPECT_THROW(fft_bandpass(img, {1.0, -0.5}), ParameterError);
    EXPECT_NO_THROW(fft_bandpass(img, {280.1423, 0.74}));
}

TEST(BandPass, NormalizedOutputSpansUnitInterval) {
    std::mt19937_64 rng(9);
    const auto out = fft_bandpass(oracle::random_image(rng, 20, 20), {65.5, 0.8688});
    const auto [lo, hi] = std::minmax_element(out.pixels().begin(), out.pixels().end());
    EXPECT_EQ(*lo, 0.0);
    EXPECT_EQ(*hi, 1.0);
}
