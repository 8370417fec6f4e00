#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <png.h>

#include "madsel/error.hpp"
#include "madsel/layout.hpp"

namespace madsel {

/// Grayscale raster with intensities in [0,1], row-major.
class GrayImage {
public:
    GrayImage() = default;

    GrayImage(int width, int height, std::vector<double> pixels)
        : width_(width), height_(height), pixels_(std::move(pixels)) {
        if (width_ < 1 || height_ < 1) throw ArgumentError("image dimensions must be >= 1");
        if (pixels_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_))
            throw ArgumentError("pixel count does not match width x height");
        for (double v : pixels_)
            if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("intensity outside [0,1]");
    }

    /// Constant image.
    GrayImage(int width, int height, double value)
        : GrayImage(width, height,
                    std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                            static_cast<std::size_t>(std::max(height, 0)),
                                        value)) {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }
    std::span<const double> pixels() const { return pixels_; }

    double operator()(int x, int y) const {
        return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                       static_cast<std::size_t>(x)];
    }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// 8-bit RGB raster, row-major interleaved.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    void set(int x, int y, std::array<std::uint8_t, 3> c) { std::memcpy(at(x, y), c.data(), 3); }
    std::array<std::uint8_t, 3> get(int x, int y) const {
        const auto* p = at(x, y);
        return {p[0], p[1], p[2]};
    }
    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for '" + path + "'");
    return bytes;
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    std::size_t pos = 2;
    auto skip = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&] {
        skip();
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
            if (v > 1'000'000) throw FormatError("PGM header value too large in '" + path + "'");
        }
        if (!any) throw FormatError("malformed PGM header in '" + path + "'");
        return static_cast<int>(v);
    };
    const int w = number();
    const int h = number();
    const int maxval = number();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw FormatError("unsupported PGM geometry in '" + path + "'");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PGM header in '" + path + "'");
    ++pos;
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - pos < n * bps) throw FormatError("truncated PGM data in '" + path + "'");
    std::vector<double> px(n);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned v = bps == 1 ? bytes[pos + i] : (unsigned(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
        px[i] = std::min(1.0, static_cast<double>(v) / maxval);
    }
    return GrayImage(w, h, std::move(px));
}

inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError("cannot decode PNG '" + path + "': " + image.message);
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    png_color black{0, 0, 0};
    if (!png_image_finish_read(&image, &black, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw FormatError("cannot decode PNG '" + path + "': " + image.message);
    }
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (color)
            px[i] = std::clamp(luma(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]) / 255.0, 0.0, 1.0);
        else
            px[i] = buf[i] / 255.0;
    }
    return GrayImage(w, h, std::move(px));
}

}  // namespace detail

/// Load a binary PGM (P5, 8 or 16 bit) or a PNG file. Color PNGs are reduced
/// with fixed luma weights.
inline GrayImage load_gray(const std::string& path) {
    const auto bytes = detail::read_file(path);
    static constexpr std::array<std::uint8_t, 8> png_sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return detail::decode_pgm(bytes, path);
    if (bytes.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), bytes.begin()))
        return detail::decode_png(bytes, path);
    throw FormatError("unsupported image format: '" + path + "'");
}

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Encode as 8-bit binary PGM.
inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels().size());
    for (double v : img.pixels()) out.push_back(to_byte(v));
    return out;
}

inline void save_pgm(const GrayImage& img, const std::string& path) { detail::write_file(path, encode_pgm(img)); }

/// Encode as binary PPM (P6).
inline std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data.begin(), img.data.end());
    return out;
}

inline void save_ppm(const RgbImage& img, const std::string& path) { detail::write_file(path, encode_ppm(img)); }

inline void save_png(const RgbImage& img, const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path + "': " + image.message);
}

/// Write PNG when the path ends in ".png", PPM otherwise.
inline void save_color(const RgbImage& img, const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0)
        save_png(img, path);
    else
        save_ppm(img, path);
}

inline RgbImage to_rgb(const GrayImage& img) {
    RgbImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const auto b = to_byte(img(x, y));
            out.set(x, y, {b, b, b});
        }
    return out;
}

/// Sample at real coordinates by bilinear interpolation. Coordinates must lie
/// within [0, width-1] x [0, height-1]. Written as a + f*(b-a) so constant
/// neighbourhoods interpolate to exactly the constant.
inline double sample_bilinear(const GrayImage& img, double x, double y) {
    const int x0 = std::min(static_cast<int>(std::floor(x)), img.width() - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
    const double bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
    return top + fy * (bottom - top);
}

/// Bilinear resize with corner-aligned sampling: output corners map onto input
/// corners. A target extent of 1 samples the source centre line.
inline GrayImage resize(const GrayImage& img, int w, int h) {
    if (w < 1 || h < 1) throw ArgumentError("resize target must be at least 1x1");
    if (img.empty()) throw ArgumentError("cannot resize an empty image");
    auto source = [](int i, int out, int in) {
        if (out == 1) return (in - 1) / 2.0;
        return static_cast<double>(i) * (in - 1) / (out - 1);
    };
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const double sy = source(y, h, img.height());
        for (int x = 0; x < w; ++x) {
            const double sx = source(x, w, img.width());
            px[static_cast<std::size_t>(y) * w + x] = std::clamp(sample_bilinear(img, sx, sy), 0.0, 1.0);
        }
    }
    return GrayImage(w, h, std::move(px));
}

/// Mirror left-right.
inline GrayImage mirror(const GrayImage& img) {
    std::vector<double> px(img.pixels().size());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            px[static_cast<std::size_t>(y) * img.width() + x] = img(img.width() - 1 - x, y);
    return GrayImage(img.width(), img.height(), std::move(px));
}

/// Row-major intensity vector; feature i is pixel (i mod width, i div width).
inline FeatureVector flatten(const GrayImage& img) {
    if (img.empty()) throw ArgumentError("cannot flatten an empty image");
    FeatureVector v;
    v.values.assign(img.pixels().begin(), img.pixels().end());
    v.layout = intern_layout(img.width(), img.height(), {LayoutBlock{Extractor::intensity}});
    return v;
}

inline std::size_t pixel_index(int x, int y, int width) {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
}

}  // namespace madsel
