#include <gtest/gtest.h>

#include <functional>
#include <numeric>

#include "madsel/madsel.hpp"
#include "oracles.hpp"

using namespace madsel;

namespace {

GrayImage random_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (auto& v : px) v = rng.uniform();
    return GrayImage(w, h, std::move(px));
}

GrayImage map_pixels(const GrayImage& img, const std::function<double(double)>& f) {
    std::vector<double> px(img.pixels().begin(), img.pixels().end());
    for (auto& v : px) v = f(v);
    return GrayImage(img.width(), img.height(), std::move(px));
}

// Random strictly increasing map of [0,1] onto [0,1].
std::function<double(double)> random_monotone(Rng& rng) {
    const double a = rng.uniform(0.5, 6.0), g = rng.uniform(0.3, 3.0), w = rng.uniform(0.1, 0.9);
    return [=](double v) {
        const double e = std::expm1(a * v) / std::expm1(a);
        return std::clamp(w * e + (1 - w) * std::pow(v, g), 0.0, 1.0);
    };
}

double slice_sum(const FeatureVector& v, std::size_t begin, std::size_t len) {
    return std::accumulate(v.values.begin() + begin, v.values.begin() + begin + len, 0.0);
}

unsigned reflect_code(unsigned c) {
    // neighbour p of the mirrored image is neighbour (4 - p) mod 8 of the original
    unsigned out = 0;
    for (int p = 0; p < 8; ++p)
        if (c >> p & 1u) out |= 1u << ((12 - p) % 8);
    return out;
}

}  // namespace

TEST(LbpCode, ConstantPatchIsAllOnes) {
    EXPECT_EQ(lbp_code(GrayImage(3, 3, 0.4), 1, 1, 8, 1), 255u);
}

TEST(LbpCode, BrightCentreIsZero) {
    std::vector<double> px(9, 0.2);
    px[4] = 0.9;
    EXPECT_EQ(lbp_code(GrayImage(3, 3, px), 1, 1, 8, 1), 0u);
}

TEST(LbpCode, EastNeighbourOnly) {
    // centre 0.5, east 0.6, others 0.4
    std::vector<double> px(9, 0.4);
    px[4] = 0.5;
    px[5] = 0.6;
    const GrayImage img(3, 3, px);
    unsigned expect = 0;
    for (int p = 0; p < 8; ++p) {
        const double a = 2 * std::numbers::pi * p / 8;
        if (oracle::bilinear(img, 1 + std::cos(a), 1 - std::sin(a)) >= 0.5 - 1e-15) expect |= 1u << p;
    }
    // diagonal samples interpolate to about 0.45
    EXPECT_EQ(expect, 1u);
    EXPECT_EQ(lbp_code(img, 1, 1, 8, 1), 1u);
    EXPECT_EQ(lbp_code(img, 1, 1, 8, 1, LbpSampling::nearest), 1u);
}

TEST(LbpCode, EastNeighbourOnlyExact) {
    // the diagonal neighbours interpolate between 0.4 values only
    std::vector<double> px(25, 0.4);
    px[12] = 0.5;
    px[13] = 0.6;
    EXPECT_EQ(lbp_code(GrayImage(5, 5, px), 2, 2, 8, 1), 1u);
}

TEST(LbpCode, Preconditions) {
    const GrayImage img(5, 5, 0.5);
    EXPECT_THROW(lbp_code(img, 0, 2, 8, 1), ArgumentError);
    EXPECT_THROW(lbp_code(img, 2, 2, 8, 3), ArgumentError);
    EXPECT_THROW(lbp_code(img, 2, 2, 3, 1), ArgumentError);
    EXPECT_NO_THROW(lbp_code(img, 2, 2, 8, 2));
}

TEST(LbpCode, MatchesNaiveSampling) {
    const auto img = random_image(21, 19, 7);
    for (int r = 1; r <= 8; ++r)
        for (int y = r; y < img.height() - r; ++y)
            for (int x = r; x < img.width() - r; ++x) ASSERT_EQ(lbp_code(img, x, y, 8, r), oracle::lbp8(img, x, y, r));
}

TEST(Uniformity, Examples) {
    EXPECT_EQ(uniformity(0b00000000, 8), 0);
    EXPECT_EQ(uniformity(0b01010101, 8), 8);
    EXPECT_EQ(uniformity(0b00001111, 8), 2);
    EXPECT_EQ(uniformity(0b10000001, 8), 2);
}

TEST(Uniformity, FiftyEightUniformCodes) {
    int count = 0;
    for (unsigned c = 0; c < 256; ++c) {
        EXPECT_EQ(uniformity(c, 8), oracle::transitions(c, 8));
        count += uniformity(c, 8) <= 2;
    }
    EXPECT_EQ(count, 58);
    EXPECT_EQ(oracle::uniform_codes().size(), 58u);
}

TEST(Uniformity, BinTableAscending) {
    const auto uni = oracle::uniform_codes();
    const auto& t = ulbp_bin_table();
    for (std::size_t i = 0; i < uni.size(); ++i) EXPECT_EQ(t[uni[i]], static_cast<int>(i));
    for (unsigned c = 0; c < 256; ++c)
        if (oracle::transitions(c, 8) > 2) { EXPECT_EQ(t[c], 58); }
}

TEST(UlbpHistogram, ConstantImage) {
    const auto v = ulbp_histogram(GrayImage(12, 10, 0.7), 2, {0, 0, 12, 10});
    ASSERT_EQ(v.size(), 59u);
    EXPECT_EQ(v.values[static_cast<std::size_t>(ulbp_bin_table()[255])], 1.0);
    EXPECT_EQ(ulbp_bin_table()[255], 57);
    EXPECT_NEAR(slice_sum(v, 0, 59), 1.0, 1e-9);
}

TEST(UlbpHistogram, MatchesNaiveRecount) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto img = random_image(32, 32, 100 + s);
        for (int r : {1, 2, 5}) {
            for (Rect region : {Rect{0, 0, 32, 32}, Rect{3, 5, 20, 17}}) {
                const auto v = ulbp_histogram(img, r, region);
                const auto counts = oracle::ulbp_counts(img, r, region);
                const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
                for (std::size_t b = 0; b < 59; ++b) ASSERT_DOUBLE_EQ(v.values[b], counts[b] / total);
                EXPECT_NEAR(slice_sum(v, 0, 59), 1.0, 1e-9);
                EXPECT_EQ((*v.layout)[0].region, region);
            }
        }
    }
}

TEST(UlbpHistogram, EmptyErodedRegionThrows) {
    const auto img = random_image(10, 10, 1);
    EXPECT_THROW(ulbp_histogram(img, 1, {0, 0, 2, 10}), ArgumentError);
    EXPECT_THROW(ulbp_histogram(img, 5, {0, 0, 10, 10}), ArgumentError);
    EXPECT_THROW(ulbp_histogram(img, 1, {5, 5, 10, 10}), ArgumentError);
    EXPECT_THROW(ulbp_histogram(img, 9, {0, 0, 10, 10}), ArgumentError);
}

TEST(LbpInvariance, NearestSamplingUnderMonotoneMaps) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_image(24, 24, 200 + trial);
        const auto mapped = map_pixels(img, random_monotone(rng));
        for (int r : {1, 3})
            for (int y = r; y < 24 - r; ++y)
                for (int x = r; x < 24 - r; ++x)
                    ASSERT_EQ(lbp_code(img, x, y, 8, r, LbpSampling::nearest),
                              lbp_code(mapped, x, y, 8, r, LbpSampling::nearest));
    }
}

TEST(LbpInvariance, FourNeighboursUnderMonotoneMaps) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_image(20, 20, 300 + trial);
        const auto mapped = map_pixels(img, random_monotone(rng));
        for (int y = 2; y < 18; ++y)
            for (int x = 2; x < 18; ++x) ASSERT_EQ(lbp_code(img, x, y, 4, 2), lbp_code(mapped, x, y, 4, 2));
    }
}

TEST(LbpInvariance, BilinearUnderIncreasingAffineMaps) {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_image(20, 20, 400 + trial);
        const double a = rng.uniform(0.1, 1.0), b = rng.uniform(0.0, 1.0 - a);
        const auto mapped = map_pixels(img, [=](double v) { return a * v + b; });
        for (int y = 3; y < 17; ++y)
            for (int x = 3; x < 17; ++x) ASSERT_EQ(lbp_code(img, x, y, 8, 3), lbp_code(mapped, x, y, 8, 3));
    }
}

TEST(UlbpAll, LengthAndSlices) {
    const auto img = random_image(40, 36, 5);
    const auto v = ulbp_all(img);
    ASSERT_EQ(v.size(), 472u);
    const auto r1 = ulbp_histogram(img, 1, {0, 0, 40, 36});
    for (std::size_t b = 0; b < 59; ++b) EXPECT_EQ(v.values[b], r1.values[b]);
    for (int r = 0; r < 8; ++r) {
        EXPECT_NEAR(slice_sum(v, static_cast<std::size_t>(r) * 59, 59), 1.0, 1e-9);
        EXPECT_EQ((*v.layout)[static_cast<std::size_t>(r) * 59].params[1], r + 1);
    }
}

TEST(UlbpAll, TooSmallForRadiusEight) { EXPECT_THROW(ulbp_all(GrayImage(16, 30, 0.5)), ArgumentError); }

TEST(UlbpPatches, LengthAndConstant) {
    const GrayImage flat(180, 240, 0.3);
    for (auto axis : {StripAxis::vertical, StripAxis::horizontal}) {
        const auto v = ulbp_patches(flat, axis);
        ASSERT_EQ(v.size(), 472u);
        for (std::size_t s = 1; s < 8; ++s)
            for (std::size_t b = 0; b < 59; ++b) EXPECT_EQ(v.values[s * 59 + b], v.values[b]);
    }
}

TEST(UlbpPatches, StripsCoverImageWithRemainderInLast) {
    const auto v = ulbp_patches(GrayImage(180, 240, 0.3), StripAxis::vertical);
    EXPECT_EQ((*v.layout)[0].region, (Rect{0, 0, 22, 240}));
    EXPECT_EQ((*v.layout)[7 * 59].region, (Rect{154, 0, 26, 240}));
    const auto h = ulbp_patches(GrayImage(180, 240, 0.3), StripAxis::horizontal);
    EXPECT_EQ((*h.layout)[7 * 59].region, (Rect{0, 210, 180, 30}));
}

TEST(UlbpPatches, MirrorReversesVerticalStrips) {
    const auto img = random_image(64, 24, 9);
    const auto v = ulbp_patches(mirror(img), StripAxis::vertical);
    const auto& bins = ulbp_bin_table();
    const auto uni = oracle::uniform_codes();
    for (int s = 0; s < 8; ++s) {
        // recount the mirrored strip on the original, with reflected codes
        const Rect src{(7 - s) * 8, 0, 8, 24};
        std::array<double, 59> expect{};
        double total = 0;
        for (int y = 1; y < 23; ++y)
            for (int x = src.x + 1; x < src.x + 7; ++x) {
                expect[static_cast<std::size_t>(bins[reflect_code(oracle::lbp8(img, x, y, 1))])] += 1;
                total += 1;
            }
        for (std::size_t b = 0; b < 59; ++b)
            ASSERT_DOUBLE_EQ(v.values[static_cast<std::size_t>(s) * 59 + b], expect[b] / total) << s << ' ' << b;
    }
}

TEST(UlbpPatches, ThinStripThrows) {
    EXPECT_THROW(ulbp_patches(GrayImage(16, 30, 0.5), StripAxis::vertical), ArgumentError);
    EXPECT_THROW(ulbp_patches(GrayImage(30, 30, 0.5), StripAxis::none), ArgumentError);
}

TEST(Hog, DefaultLength) {
    const auto v = hog(random_image(180, 240, 1));
    EXPECT_EQ(v.size(), 1080u);
    for (std::size_t c = 0; c < 120; ++c) {
        double sq = 0;
        for (std::size_t b = 0; b < 9; ++b) sq += v.values[c * 9 + b] * v.values[c * 9 + b];
        EXPECT_LE(std::sqrt(sq), 1.0);
        EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-4);
    }
}

TEST(Hog, ConstantImageIsZero) {
    const auto v = hog(GrayImage(180, 240, 0.6));
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(Hog, VerticalStepEdge) {
    std::vector<double> px(180 * 240);
    for (int y = 0; y < 240; ++y)
        for (int x = 0; x < 180; ++x) px[pixel_index(x, y, 180)] = x >= 45 ? 1.0 : 0.0;
    const auto v = hog(GrayImage(180, 240, px));
    // x = 44 and 45 have gx = 1, gy = 0: orientation 0, bin 0; they fall in cell column 2
    for (int row = 0; row < 12; ++row)
        for (int col = 0; col < 10; ++col) {
            const std::size_t base = static_cast<std::size_t>(row * 10 + col) * 9;
            for (std::size_t b = 0; b < 9; ++b) {
                const double expect = col == 2 && b == 0 ? 1.0 : 0.0;
                EXPECT_NEAR(v.values[base + b], expect, 1e-6);
            }
        }
}

TEST(Hog, MatchesNaiveCellHistogram) {
    const auto img = random_image(20, 15, 4);
    const auto v = hog(img, {4, 3, 6, 1e-6});
    ASSERT_EQ(v.size(), 4u * 3 * 6);
    for (int cr = 0; cr < 3; ++cr)
        for (int cc = 0; cc < 4; ++cc) {
            std::array<double, 6> h{};
            for (int y = cr * 5; y < cr * 5 + 5; ++y)
                for (int x = cc * 5; x < cc * 5 + 5; ++x) {
                    const double gx = img(std::min(x + 1, 19), y) - img(std::max(x - 1, 0), y);
                    const double gy = img(x, std::min(y + 1, 14)) - img(x, std::max(y - 1, 0));
                    double deg = std::atan2(gy, gx) * 180 / std::numbers::pi;
                    if (deg < 0) deg += 180;
                    if (deg >= 180) deg -= 180;
                    h[std::min<std::size_t>(5, static_cast<std::size_t>(deg / 30))] += std::sqrt(gx * gx + gy * gy);
                }
            double n = 1e-12;
            for (double x : h) n += x * x;
            for (std::size_t b = 0; b < 6; ++b)
                EXPECT_NEAR(v.values[static_cast<std::size_t>(cr * 4 + cc) * 6 + b], h[b] / std::sqrt(n), 1e-9);
        }
}

TEST(Hog, GridMustDivide) {
    EXPECT_THROW(hog(GrayImage(181, 240, 0.5)), ArgumentError);
    EXPECT_THROW(hog(GrayImage(180, 240, 0.5), {10, 12, 1, 1e-6}), ArgumentError);
}

TEST(Hog, LayoutCells) {
    const auto v = hog(GrayImage(180, 240, 0.5));
    const auto& e = (*v.layout)[(3 * 10 + 2) * 9 + 5];
    EXPECT_EQ(e.region, (Rect{36, 60, 18, 20}));
    EXPECT_EQ(e.bin, 5);
    EXPECT_EQ(e.params, (std::array<int, 3>{3, 2, 5}));
}

TEST(Fuse, FusionLength) {
    const auto img = random_image(180, 240, 2);
    const auto f = fuse({flatten(img), hog(img), ulbp_all(img)});
    EXPECT_EQ(f.size(), 44752u);
    EXPECT_EQ(extract(img, ExtractorKind::fusion).values, f.values);
}

TEST(Fuse, SingleIsIdentity) {
    const auto v = hog(random_image(180, 240, 3));
    const auto f = fuse({v});
    EXPECT_EQ(f.values, v.values);
    EXPECT_EQ(*f.layout, *v.layout);
}

TEST(Fuse, LayoutOffsets) {
    const auto img = random_image(40, 36, 3);
    const auto a = ulbp_patches(img, StripAxis::horizontal), b = hog(img, {4, 4, 9, 1e-6});
    const auto f = fuse({a, b});
    for (std::size_t k = 0; k < b.size(); ++k) EXPECT_EQ((*f.layout)[a.size() + k], (*b.layout)[k]);
}

TEST(Fuse, MismatchedImagesThrow) {
    EXPECT_THROW(fuse({flatten(GrayImage(3, 3, 0.5)), flatten(GrayImage(4, 3, 0.5))}), ArgumentError);
    EXPECT_THROW(fuse({}), ArgumentError);
}

TEST(Extract, PresetLengthsAndBounds) {
    const auto img = random_image(180, 240, 8);
    const std::pair<const char*, std::size_t> expect[] = {{"raw", 43200},      {"hog", 1080},     {"ulbp_all", 472},
                                                          {"ulbp_vert", 472},  {"ulbp_hor", 472}, {"fusion", 44752}};
    for (auto [name, len] : expect) {
        const auto v = extract(img, parse_extractor(name));
        EXPECT_EQ(v.size(), len) << name;
        EXPECT_EQ(v.layout->size(), len);
        for (const auto& e : v.layout->entries()) ASSERT_TRUE(e.region.inside(180, 240));
        for (double x : v.values) ASSERT_TRUE(std::isfinite(x));
    }
    EXPECT_THROW(parse_extractor("sift"), ArgumentError);
}

TEST(Layout, JsonRoundTrip) {
    const auto img = random_image(180, 240, 8);
    const auto v = fuse({ulbp_patches(img, StripAxis::vertical), hog(img), ulbp_histogram(img, 2, {4, 4, 30, 30})});
    const auto back = layout_from_json(to_json(*v.layout));
    EXPECT_EQ(back, *v.layout);
    EXPECT_EQ(back.entries(), v.layout->entries());
}
