#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "madsel/error.hpp"
#include "madsel/image.hpp"
#include "madsel/layout.hpp"

namespace madsel {

enum class LbpSampling {
    bilinear,  ///< interpolate at non-integer neighbour positions
    nearest,   ///< round neighbour positions to the closest pixel
};

/// Circular neighbourhood sampler for LBP codes. Neighbour p sits at angle
/// 2*pi*p/P, starting east and turning counter-clockwise (image y grows downward).
class LbpSampler {
public:
    LbpSampler(int neighbors, int radius, LbpSampling sampling = LbpSampling::bilinear)
        : neighbors_(neighbors), radius_(radius) {
        if (neighbors < 4 || neighbors > 31) throw ArgumentError("LBP neighbour count must be in [4, 31]");
        if (radius < 1) throw ArgumentError("LBP radius must be >= 1");
        offsets_.reserve(static_cast<std::size_t>(neighbors));
        for (int p = 0; p < neighbors; ++p) {
            const double angle = 2.0 * std::numbers::pi * p / neighbors;
            double dx = radius * std::cos(angle);
            double dy = -radius * std::sin(angle);
            if (sampling == LbpSampling::nearest || std::abs(dx - std::round(dx)) < 1e-9) dx = std::round(dx);
            if (sampling == LbpSampling::nearest || std::abs(dy - std::round(dy)) < 1e-9) dy = std::round(dy);
            offsets_.push_back({dx, dy});
        }
    }

    int neighbors() const { return neighbors_; }
    int radius() const { return radius_; }

    /// Neighbour samples stay within [x-R, x+R] x [y-R, y+R].
    bool fits(const GrayImage& img, int x, int y) const {
        return x - radius_ >= 0 && y - radius_ >= 0 && x + radius_ < img.width() && y + radius_ < img.height();
    }

    /// Bit p is set iff neighbour p >= centre. Caller guarantees fits().
    std::uint32_t code(const GrayImage& img, int x, int y) const {
        const double centre = img(x, y);
        std::uint32_t c = 0;
        for (int p = 0; p < neighbors_; ++p) {
            const auto [dx, dy] = offsets_[static_cast<std::size_t>(p)];
            const double v = sample_bilinear(img, x + dx, y + dy);
            if (v >= centre) c |= 1u << p;
        }
        return c;
    }

private:
    int neighbors_;
    int radius_;
    std::vector<std::array<double, 2>> offsets_;
};

/// LBP code of pixel (x, y).
inline std::uint32_t lbp_code(const GrayImage& img, int x, int y, int neighbors, int radius,
                              LbpSampling sampling = LbpSampling::bilinear) {
    const LbpSampler sampler(neighbors, radius, sampling);
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height() || !sampler.fits(img, x, y))
        throw ArgumentError("LBP neighbourhood leaves the image at (" + std::to_string(x) + ", " +
                            std::to_string(y) + ")");
    return sampler.code(img, x, y);
}

/// Number of 0/1 transitions in the circular P-bit code.
inline int uniformity(std::uint32_t code, int neighbors) {
    const std::uint32_t mask = neighbors >= 32 ? ~0u : ((1u << neighbors) - 1u);
    code &= mask;
    const std::uint32_t rotated = ((code >> 1) | (code << (neighbors - 1))) & mask;
    return std::popcount(code ^ rotated);
}

/// Code -> uniform-LBP bin for P = 8: the 58 uniform codes in ascending order
/// occupy bins 0..57, every other code lands in bin 58.
inline const std::array<int, 256>& ulbp_bin_table() {
    static const auto table = [] {
        std::array<int, 256> t{};
        int next = 0;
        for (std::uint32_t c = 0; c < 256; ++c) t[c] = uniformity(c, 8) <= 2 ? next++ : -1;
        for (auto& v : t)
            if (v < 0) v = next;
        return t;
    }();
    return table;
}

namespace detail {

/// Raw 59-bin counts over the region eroded by the radius.
inline std::array<std::uint64_t, kUlbpBins> ulbp_counts(const GrayImage& img, const LbpSampler& sampler,
                                                        const Rect& region) {
    if (!region.inside(img.width(), img.height())) throw ArgumentError("uLBP region outside the image");
    const int r = sampler.radius();
    const int x0 = region.x + r, x1 = region.x + region.width - r;
    const int y0 = region.y + r, y1 = region.y + region.height - r;
    if (x0 >= x1 || y0 >= y1) throw ArgumentError("uLBP region too small for radius " + std::to_string(r));
    const auto& bins = ulbp_bin_table();
    std::array<std::uint64_t, kUlbpBins> counts{};
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) ++counts[static_cast<std::size_t>(bins[sampler.code(img, x, y)])];
    return counts;
}

inline void append_normalized(std::vector<double>& out, const std::array<std::uint64_t, kUlbpBins>& counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    for (auto c : counts) out.push_back(static_cast<double>(c) / static_cast<double>(total));
}

}  // namespace detail

/// L1-normalised 59-bin uniform LBP histogram (P = 8) over a region. Pixels whose
/// neighbourhood would leave the region are skipped.
inline FeatureVector ulbp_histogram(const GrayImage& img, int radius, const Rect& region,
                                    LbpSampling sampling = LbpSampling::bilinear) {
    if (radius < 1 || radius > 8) throw ArgumentError("uLBP radius must be in [1, 8]");
    const LbpSampler sampler(8, radius, sampling);
    FeatureVector v;
    v.values.reserve(kUlbpBins);
    detail::append_normalized(v.values, detail::ulbp_counts(img, sampler, region));
    LayoutBlock block{Extractor::ulbp};
    block.radius = radius;
    if (region != Rect{0, 0, img.width(), img.height()}) block.region = region;
    v.layout = intern_layout(img.width(), img.height(), {block});
    return v;
}

/// Whole-image histograms for R = 1..8 concatenated: 8 x 59 = 472 features.
inline FeatureVector ulbp_all(const GrayImage& img, LbpSampling sampling = LbpSampling::bilinear) {
    FeatureVector v;
    v.values.reserve(8 * kUlbpBins);
    std::vector<LayoutBlock> blocks;
    const Rect whole{0, 0, img.width(), img.height()};
    for (int r = 1; r <= 8; ++r) {
        detail::append_normalized(v.values, detail::ulbp_counts(img, LbpSampler(8, r, sampling), whole));
        LayoutBlock b{Extractor::ulbp};
        b.radius = r;
        blocks.push_back(b);
    }
    v.layout = intern_layout(img.width(), img.height(), std::move(blocks));
    return v;
}

/// One R = 1 histogram per strip, concatenated: 8 strips x 59 = 472 features.
inline FeatureVector ulbp_patches(const GrayImage& img, StripAxis axis, int n_patches = 8, int radius = 1,
                                  LbpSampling sampling = LbpSampling::bilinear) {
    if (axis == StripAxis::none) throw ArgumentError("patch histograms need a strip axis");
    const LbpSampler sampler(8, radius, sampling);
    FeatureVector v;
    v.values.reserve(static_cast<std::size_t>(n_patches) * kUlbpBins);
    for (const auto& strip : strips(img.width(), img.height(), axis, n_patches))
        detail::append_normalized(v.values, detail::ulbp_counts(img, sampler, strip));
    LayoutBlock b{Extractor::ulbp};
    b.radius = radius;
    b.axis = axis;
    b.patches = n_patches;
    v.layout = intern_layout(img.width(), img.height(), {b});
    return v;
}

struct HogConfig {
    int grid_cols = 10;
    int grid_rows = 12;
    int orientations = 9;
    double epsilon = 1e-6;
};

/// Cell-wise histograms of oriented gradients. Centred [-1, 0, 1] differences
/// (replicated border), unsigned orientation in [0, pi) hard-binned with
/// magnitude weight, each cell L2-normalised as h / sqrt(|h|^2 + eps^2).
/// Feature index = (row * grid_cols + col) * orientations + bin.
inline FeatureVector hog(const GrayImage& img, const HogConfig& cfg = {}) {
    if (cfg.orientations < 2) throw ArgumentError("HOG needs at least 2 orientations");
    const auto cells = hog_cells(img.width(), img.height(), cfg.grid_cols, cfg.grid_rows);
    const int w = img.width(), h = img.height();
    const auto bins = static_cast<std::size_t>(cfg.orientations);
    const double bin_width = std::numbers::pi / cfg.orientations;

    FeatureVector v;
    v.values.assign(cells.size() * bins, 0.0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Rect& cell = cells[c];
        double* hist = v.values.data() + c * bins;
        for (int y = cell.y; y < cell.y + cell.height; ++y)
            for (int x = cell.x; x < cell.x + cell.width; ++x) {
                const double gx = img(std::min(x + 1, w - 1), y) - img(std::max(x - 1, 0), y);
                const double gy = img(x, std::min(y + 1, h - 1)) - img(x, std::max(y - 1, 0));
                const double mag = std::hypot(gx, gy);
                if (mag == 0.0) continue;
                double theta = std::atan2(gy, gx);
                if (theta < 0.0) theta += std::numbers::pi;
                if (theta >= std::numbers::pi) theta -= std::numbers::pi;
                const auto b = std::min(bins - 1, static_cast<std::size_t>(theta / bin_width));
                hist[b] += mag;
            }
        double sq = 0.0;
        for (std::size_t b = 0; b < bins; ++b) sq += hist[b] * hist[b];
        const double norm = std::sqrt(sq + cfg.epsilon * cfg.epsilon);
        for (std::size_t b = 0; b < bins; ++b) hist[b] /= norm;
    }
    LayoutBlock block{Extractor::hog};
    block.grid_cols = cfg.grid_cols;
    block.grid_rows = cfg.grid_rows;
    block.orientations = cfg.orientations;
    v.layout = intern_layout(w, h, {block});
    return v;
}

/// Feature-level fusion by concatenation.
inline FeatureVector fuse(const std::vector<FeatureVector>& vs) {
    if (vs.empty()) throw ArgumentError("nothing to fuse");
    for (const auto& v : vs)
        if (!v.layout || v.layout->size() != v.values.size())
            throw ArgumentError("feature vector without a matching layout");
    if (vs.size() == 1) return vs.front();
    const int w = vs.front().layout->image_width(), h = vs.front().layout->image_height();
    FeatureVector out;
    std::vector<LayoutBlock> blocks;
    for (const auto& v : vs) {
        if (v.layout->image_width() != w || v.layout->image_height() != h)
            throw ArgumentError("fused vectors come from images of different size");
        out.values.insert(out.values.end(), v.values.begin(), v.values.end());
        blocks.insert(blocks.end(), v.layout->blocks().begin(), v.layout->blocks().end());
    }
    out.layout = intern_layout(w, h, std::move(blocks));
    return out;
}

/// Named extractor presets exposed on the command line.
enum class ExtractorKind { raw, hog, ulbp_all, ulbp_vert, ulbp_hor, fusion };

inline std::string_view to_string(ExtractorKind k) {
    switch (k) {
        case ExtractorKind::raw: return "raw";
        case ExtractorKind::hog: return "hog";
        case ExtractorKind::ulbp_all: return "ulbp_all";
        case ExtractorKind::ulbp_vert: return "ulbp_vert";
        case ExtractorKind::ulbp_hor: return "ulbp_hor";
        case ExtractorKind::fusion: return "fusion";
    }
    return "?";
}

inline ExtractorKind parse_extractor(std::string_view name) {
    for (auto k : {ExtractorKind::raw, ExtractorKind::hog, ExtractorKind::ulbp_all, ExtractorKind::ulbp_vert,
                   ExtractorKind::ulbp_hor, ExtractorKind::fusion})
        if (to_string(k) == name) return k;
    throw ArgumentError("unknown extractor '" + std::string(name) + "'");
}

inline FeatureVector extract(const GrayImage& img, ExtractorKind kind, const HogConfig& hog_cfg = {}) {
    switch (kind) {
        case ExtractorKind::raw: return flatten(img);
        case ExtractorKind::hog: return hog(img, hog_cfg);
        case ExtractorKind::ulbp_all: return ulbp_all(img);
        case ExtractorKind::ulbp_vert: return ulbp_patches(img, StripAxis::vertical);
        case ExtractorKind::ulbp_hor: return ulbp_patches(img, StripAxis::horizontal);
        case ExtractorKind::fusion: return fuse({flatten(img), hog(img, hog_cfg), ulbp_all(img)});
    }
    throw ArgumentError("unknown extractor");
}

}  // namespace madsel
