#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "madsel/error.hpp"
#include "madsel/image.hpp"
#include "madsel/layout.hpp"

namespace madsel {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr int kBands = 5;

/// Band colours, most relevant first: red, pink, green, light green, blue.
inline constexpr std::array<Rgb, kBands> kBandPalette{{
    {255, 0, 0},
    {255, 105, 180},
    {0, 128, 0},
    {144, 238, 144},
    {0, 0, 255},
}};

struct FeatureMark {
    Rect region;
    std::size_t rank = 0;   ///< position in the selection order
    std::size_t index = 0;  ///< feature index in the layout
};

/// Region and rank of every selected feature.
inline std::vector<FeatureMark> locate_features(const FeatureLayout& layout, const std::vector<std::size_t>& selected) {
    std::vector<FeatureMark> out;
    out.reserve(selected.size());
    for (std::size_t r = 0; r < selected.size(); ++r) {
        if (selected[r] >= layout.size())
            throw ArgumentError("feature index " + std::to_string(selected[r]) + " outside layout of " +
                                std::to_string(layout.size()));
        out.push_back({layout[selected[r]].region, r, selected[r]});
    }
    return out;
}

/// Ranks split into five equal bands of floor(total/5) (at least 1); the last
/// band absorbs the remainder.
inline int band_of(std::size_t rank, std::size_t total) {
    const std::size_t width = std::max<std::size_t>(1, total / kBands);
    return static_cast<int>(std::min<std::size_t>(rank / width, kBands - 1));
}

/// Paint each mark's region opaquely in its band colour over the grayscale
/// image. Bands are drawn from least to most relevant, so band 0 ends on top.
inline RgbImage render_overlay(const GrayImage& img, const std::vector<FeatureMark>& marks, std::size_t total) {
    if (total < 1) throw ArgumentError("band partition needs total >= 1");
    RgbImage out = to_rgb(img);
    std::vector<const FeatureMark*> order;
    order.reserve(marks.size());
    for (const auto& m : marks) {
        if (!m.region.inside(img.width(), img.height())) throw ArgumentError("mark outside the image");
        order.push_back(&m);
    }
    std::stable_sort(order.begin(), order.end(), [&](const FeatureMark* a, const FeatureMark* b) {
        return band_of(a->rank, total) > band_of(b->rank, total);
    });
    for (const auto* m : order) {
        const Rgb c = kBandPalette[static_cast<std::size_t>(band_of(m->rank, total))];
        for (int y = m->region.y; y < m->region.y + m->region.height; ++y)
            for (int x = m->region.x; x < m->region.x + m->region.width; ++x) out.set(x, y, c);
    }
    return out;
}

/// HOG glyph field: for every cell and orientation bin a line through the cell
/// centre, drawn along the edge direction (perpendicular to the bin's gradient
/// direction) with brightness proportional to the bin value relative to the
/// largest value in the vector.
inline RgbImage render_hog_glyphs(const FeatureVector& v) {
    if (!v.layout || v.layout->blocks().size() != 1 || v.layout->blocks().front().extractor != Extractor::hog ||
        v.layout->size() != v.values.size())
        throw ArgumentError("glyphs need a vector produced by the HOG extractor");
    const auto& block = v.layout->blocks().front();
    RgbImage out(v.layout->image_width(), v.layout->image_height());
    double peak = 0.0;
    for (double x : v.values) peak = std::max(peak, x);
    if (peak <= 0.0) return out;
    const auto bins = static_cast<std::size_t>(block.orientations);
    const auto cells = hog_cells(out.width, out.height, block.grid_cols, block.grid_rows);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Rect& cell = cells[c];
        const double cx = cell.x + (cell.width - 1) / 2.0, cy = cell.y + (cell.height - 1) / 2.0;
        const double half = std::min(cell.width, cell.height) / 2.0 - 1.0;
        for (std::size_t b = 0; b < bins; ++b) {
            const double value = v.values[c * bins + b];
            if (value <= 0.0) continue;
            const auto level = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, value / peak)));
            const double phi = (static_cast<double>(b) + 0.5) * std::numbers::pi / static_cast<double>(bins) +
                               std::numbers::pi / 2.0;
            const double dx = std::cos(phi), dy = std::sin(phi);
            for (double t = -half; t <= half; t += 0.25) {
                const int x = std::clamp(static_cast<int>(std::lround(cx + t * dx)), cell.x, cell.x + cell.width - 1);
                const int y = std::clamp(static_cast<int>(std::lround(cy + t * dy)), cell.y, cell.y + cell.height - 1);
                auto* p = out.at(x, y);
                if (p[0] < level) p[0] = p[1] = p[2] = level;
            }
        }
    }
    return out;
}

}  // namespace madsel
