#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "madsel/error.hpp"

namespace madsel {

/// Axis-aligned pixel rectangle, half-open: [x, x+width) x [y, y+height).
struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool inside(int image_width, int image_height) const {
        return x >= 0 && y >= 0 && width > 0 && height > 0 && x + width <= image_width &&
               y + height <= image_height;
    }
    friend bool operator==(const Rect&, const Rect&) = default;
};

enum class Extractor { intensity, ulbp, hog };

inline std::string_view to_string(Extractor e) {
    switch (e) {
        case Extractor::intensity: return "intensity";
        case Extractor::ulbp: return "ulbp";
        case Extractor::hog: return "hog";
    }
    return "?";
}

enum class StripAxis { none, vertical, horizontal };

inline constexpr int kUlbpBins = 59;

/// Split an image into n strips along an axis. Vertical strips are columns
/// (split along x), horizontal strips are bands (split along y). The last strip
/// absorbs the remainder.
inline std::vector<Rect> strips(int width, int height, StripAxis axis, int n) {
    if (axis == StripAxis::none || n == 1) return {Rect{0, 0, width, height}};
    if (n < 1) throw ArgumentError("strip count must be >= 1");
    const int extent = axis == StripAxis::vertical ? width : height;
    const int step = extent / n;
    if (step < 1) throw ArgumentError("image too small for requested strip count");
    std::vector<Rect> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int begin = i * step;
        const int len = i == n - 1 ? extent - begin : step;
        if (axis == StripAxis::vertical)
            out.push_back({begin, 0, len, height});
        else
            out.push_back({0, begin, width, len});
    }
    return out;
}

/// Provenance of one feature.
struct LayoutEntry {
    Extractor extractor = Extractor::intensity;
    Rect region;
    int bin = 0;
    /// intensity: (x, y, 0); ulbp: (P, R, patch); hog: (cell row, cell col, orientation)
    std::array<int, 3> params{};
    friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

/// Compact descriptor of a contiguous run of features produced by one extractor
/// call. A layout is a list of blocks; entries are expanded from them.
struct LayoutBlock {
    Extractor extractor = Extractor::intensity;
    int neighbors = 8;        // ulbp
    int radius = 1;           // ulbp
    StripAxis axis = StripAxis::none;  // ulbp
    int patches = 1;          // ulbp
    Rect region{};            // ulbp with axis none; empty means the whole image
    int grid_cols = 10;       // hog
    int grid_rows = 12;       // hog
    int orientations = 9;     // hog

    friend bool operator==(const LayoutBlock&, const LayoutBlock&) = default;
};

inline std::vector<Rect> hog_cells(int width, int height, int grid_cols, int grid_rows) {
    if (grid_cols < 1 || grid_rows < 1 || width % grid_cols != 0 || height % grid_rows != 0)
        throw ArgumentError("image " + std::to_string(width) + "x" + std::to_string(height) +
                            " not divisible into a " + std::to_string(grid_cols) + "x" +
                            std::to_string(grid_rows) + " grid");
    const int cw = width / grid_cols;
    const int ch = height / grid_rows;
    std::vector<Rect> cells;
    cells.reserve(static_cast<std::size_t>(grid_cols * grid_rows));
    for (int r = 0; r < grid_rows; ++r)
        for (int c = 0; c < grid_cols; ++c) cells.push_back({c * cw, r * ch, cw, ch});
    return cells;
}

class FeatureLayout {
public:
    FeatureLayout(int image_width, int image_height, std::vector<LayoutBlock> blocks)
        : width_(image_width), height_(image_height), blocks_(std::move(blocks)) {
        if (width_ < 1 || height_ < 1) throw ArgumentError("layout image dimensions must be >= 1");
        for (const auto& b : blocks_) expand(b);
    }

    int image_width() const { return width_; }
    int image_height() const { return height_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<LayoutBlock>& blocks() const { return blocks_; }
    const std::vector<LayoutEntry>& entries() const { return entries_; }
    const LayoutEntry& operator[](std::size_t i) const { return entries_.at(i); }

    friend bool operator==(const FeatureLayout& a, const FeatureLayout& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.blocks_ == b.blocks_;
    }

private:
    void expand(const LayoutBlock& b) {
        switch (b.extractor) {
            case Extractor::intensity:
                entries_.reserve(entries_.size() + static_cast<std::size_t>(width_) * height_);
                for (int y = 0; y < height_; ++y)
                    for (int x = 0; x < width_; ++x)
                        entries_.push_back({Extractor::intensity, {x, y, 1, 1}, 0, {x, y, 0}});
                break;
            case Extractor::ulbp: {
                const auto rects = b.axis == StripAxis::none && b.region.width > 0
                                       ? std::vector<Rect>{b.region}
                                       : strips(width_, height_, b.axis, b.patches);
                for (const auto& r : rects)
                    if (!r.inside(width_, height_)) throw ArgumentError("uLBP region outside the image");
                for (std::size_t p = 0; p < rects.size(); ++p)
                    for (int bin = 0; bin < kUlbpBins; ++bin)
                        entries_.push_back({Extractor::ulbp, rects[p], bin,
                                            {b.neighbors, b.radius, static_cast<int>(p)}});
                break;
            }
            case Extractor::hog: {
                const auto cells = hog_cells(width_, height_, b.grid_cols, b.grid_rows);
                for (std::size_t c = 0; c < cells.size(); ++c) {
                    const int row = static_cast<int>(c) / b.grid_cols;
                    const int col = static_cast<int>(c) % b.grid_cols;
                    for (int o = 0; o < b.orientations; ++o)
                        entries_.push_back({Extractor::hog, cells[c], o, {row, col, o}});
                }
                break;
            }
        }
    }

    int width_;
    int height_;
    std::vector<LayoutBlock> blocks_;
    std::vector<LayoutEntry> entries_;
};

using LayoutPtr = std::shared_ptr<const FeatureLayout>;

/// Feature values of one image paired with their provenance.
struct FeatureVector {
    std::vector<double> values;
    LayoutPtr layout;

    std::size_t size() const { return values.size(); }
};

/// Row-major sample x feature matrix. Single precision, matching the on-disk store.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

    const float* row(std::size_t r) const { return data.data() + r * cols; }

    std::vector<float> column(std::size_t c) const {
        std::vector<float> out(rows);
        for (std::size_t r = 0; r < rows; ++r) out[r] = data[r * cols + c];
        return out;
    }

    void set_row(std::size_t r, const std::vector<double>& values) {
        if (values.size() != cols) throw ArgumentError("row length does not match matrix width");
        for (std::size_t c = 0; c < cols; ++c) data[r * cols + c] = static_cast<float>(values[c]);
    }

    /// Keep only the given columns, in the given order.
    FeatureMatrix select_columns(const std::vector<std::size_t>& idx) const {
        FeatureMatrix out(rows, idx.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j) {
                if (idx[j] >= cols) throw ArgumentError("column index out of range");
                out.data[r * idx.size() + j] = data[r * cols + idx[j]];
            }
        return out;
    }

    FeatureMatrix select_rows(const std::vector<std::size_t>& idx) const {
        FeatureMatrix out(idx.size(), cols);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] >= rows) throw ArgumentError("row index out of range");
            std::copy_n(row(idx[j]), cols, out.data.begin() + static_cast<std::ptrdiff_t>(j * cols));
        }
        return out;
    }
};

// JSON form of the layout descriptor used in feature-store headers.

inline nlohmann::json to_json(const LayoutBlock& b) {
    nlohmann::json j;
    j["extractor"] = std::string(to_string(b.extractor));
    switch (b.extractor) {
        case Extractor::intensity: break;
        case Extractor::ulbp:
            j["neighbors"] = b.neighbors;
            j["radius"] = b.radius;
            j["axis"] = b.axis == StripAxis::none       ? "none"
                        : b.axis == StripAxis::vertical ? "vertical"
                                                        : "horizontal";
            j["patches"] = b.patches;
            if (b.region.width > 0)
                j["region"] = {b.region.x, b.region.y, b.region.width, b.region.height};
            break;
        case Extractor::hog:
            j["grid_cols"] = b.grid_cols;
            j["grid_rows"] = b.grid_rows;
            j["orientations"] = b.orientations;
            break;
    }
    return j;
}

inline LayoutBlock block_from_json(const nlohmann::json& j) {
    LayoutBlock b;
    try {
        const auto kind = j.at("extractor").get<std::string>();
        if (kind == "intensity") {
            b.extractor = Extractor::intensity;
        } else if (kind == "ulbp") {
            b.extractor = Extractor::ulbp;
            b.neighbors = j.at("neighbors").get<int>();
            b.radius = j.at("radius").get<int>();
            const auto axis = j.at("axis").get<std::string>();
            if (axis == "none")
                b.axis = StripAxis::none;
            else if (axis == "vertical")
                b.axis = StripAxis::vertical;
            else if (axis == "horizontal")
                b.axis = StripAxis::horizontal;
            else
                throw FormatError("unknown strip axis '" + axis + "'");
            b.patches = j.at("patches").get<int>();
            if (j.contains("region")) {
                const auto& r = j.at("region");
                b.region = {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()};
            }
        } else if (kind == "hog") {
            b.extractor = Extractor::hog;
            b.grid_cols = j.at("grid_cols").get<int>();
            b.grid_rows = j.at("grid_rows").get<int>();
            b.orientations = j.at("orientations").get<int>();
        } else {
            throw FormatError("unknown extractor '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad layout block: ") + e.what());
    }
    return b;
}

inline nlohmann::json to_json(const FeatureLayout& layout) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : layout.blocks()) blocks.push_back(to_json(b));
    return {{"image_width", layout.image_width()},
            {"image_height", layout.image_height()},
            {"blocks", blocks}};
}

inline FeatureLayout layout_from_json(const nlohmann::json& j) {
    try {
        std::vector<LayoutBlock> blocks;
        for (const auto& b : j.at("blocks")) blocks.push_back(block_from_json(b));
        return FeatureLayout(j.at("image_width").get<int>(), j.at("image_height").get<int>(),
                             std::move(blocks));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad layout: ") + e.what());
    }
}

/// Shared, immutable layout for a descriptor. Extractors run per image and the
/// expanded entry table can be large (one entry per pixel for intensity), so
/// identical descriptors resolve to one instance.
inline LayoutPtr intern_layout(int image_width, int image_height, std::vector<LayoutBlock> blocks) {
    static std::mutex mutex;
    static std::map<std::string, LayoutPtr> cache;
    nlohmann::json key = {image_width, image_height};
    for (const auto& b : blocks) key.push_back(to_json(b));
    std::lock_guard lock(mutex);
    auto [it, inserted] = cache.try_emplace(key.dump());
    if (inserted) {
        try {
            it->second =
                std::make_shared<const FeatureLayout>(image_width, image_height, std::move(blocks));
        } catch (...) {
            cache.erase(it);
            throw;
        }
    }
    return it->second;
}

}  // namespace madsel
