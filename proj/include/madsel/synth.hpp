#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "madsel/error.hpp"
#include "madsel/image.hpp"
#include "madsel/manifest.hpp"
#include "madsel/rng.hpp"

namespace madsel {

/// Pixel-wise alpha * a + (1 - alpha) * b.
inline GrayImage synth_morph(const GrayImage& a, const GrayImage& b, double alpha = 0.5) {
    if (a.width() != b.width() || a.height() != b.height()) throw ArgumentError("morph inputs differ in size");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must be in [0, 1]");
    std::vector<double> px(a.pixels().size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = std::clamp(alpha * a.pixels()[i] + (1.0 - alpha) * b.pixels()[i], 0.0, 1.0);
    return GrayImage(a.width(), a.height(), std::move(px));
}

/// Separable Gaussian blur with replicated borders.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= sum;
    const int w = img.width(), h = img.height();
    std::vector<double> tmp(static_cast<std::size_t>(w) * h), out(tmp.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * img(std::clamp(x + i, 0, w - 1), y);
            tmp[pixel_index(x, y, w)] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += k[static_cast<std::size_t>(i + r)] * tmp[pixel_index(x, std::clamp(y + i, 0, h - 1), w)];
            out[pixel_index(x, y, w)] = std::clamp(acc, 0.0, 1.0);
        }
    return GrayImage(w, h, std::move(out));
}

/// Round every intensity to the nearest 8-bit level, as written to disk.
inline GrayImage quantize8(const GrayImage& img) {
    std::vector<double> px(img.pixels().size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(img.pixels()[i]) / 255.0;
    return GrayImage(img.width(), img.height(), std::move(px));
}

/// Post-processing signature of a simulated morphing tool.
struct SimulatedTool {
    enum class Kind { none, blur, noise, sharpen };
    std::string name;
    Kind kind = Kind::none;
    double strength = 0.0;  ///< blur sigma, noise sigma, or unsharp-mask amount
};

inline std::vector<SimulatedTool> default_tools() {
    return {{"blend", SimulatedTool::Kind::none, 0.0},
            {"blur", SimulatedTool::Kind::blur, 0.5},
            {"noise", SimulatedTool::Kind::noise, 0.006},
            {"sharpen", SimulatedTool::Kind::sharpen, 0.3}};
}

inline GrayImage apply_tool(const GrayImage& img, const SimulatedTool& tool, Rng& rng) {
    switch (tool.kind) {
        case SimulatedTool::Kind::none: return img;
        case SimulatedTool::Kind::blur: return gaussian_blur(img, tool.strength);
        case SimulatedTool::Kind::noise: {
            std::vector<double> px(img.pixels().begin(), img.pixels().end());
            for (auto& v : px) v = std::clamp(v + tool.strength * rng.normal(), 0.0, 1.0);
            return GrayImage(img.width(), img.height(), std::move(px));
        }
        case SimulatedTool::Kind::sharpen: {
            const auto soft = gaussian_blur(img, 1.0);
            std::vector<double> px(img.pixels().size());
            for (std::size_t i = 0; i < px.size(); ++i)
                px[i] = std::clamp(img.pixels()[i] + tool.strength * (img.pixels()[i] - soft.pixels()[i]), 0.0, 1.0);
            return GrayImage(img.width(), img.height(), std::move(px));
        }
    }
    return img;
}

struct CorpusOptions {
    int width = 180;
    int height = 240;
    int captures_per_subject = 2;
    int group_size = 4;          ///< morph pairs are formed within groups of this many subjects
    double alpha = 0.5;
    double sensor_noise = 0.015;
    std::vector<SimulatedTool> tools = default_tools();
};

/// Per-identity rendering parameters of the procedural face.
struct FaceParams {
    double face_cx, face_cy, face_ax, face_ay;
    double skin;
    double eye_dx, eye_y, eye_rx, eye_ry;
    double brow_gap;
    double mouth_y, mouth_w;
    double nose_len;
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    std::vector<double> pores;  ///< smoothed per-identity skin noise field
};

inline FaceParams random_face(Rng& rng, int w, int h) {
    FaceParams f;
    f.face_cx = w / 2.0 + rng.uniform(-4, 4);
    f.face_cy = h * 0.52 + rng.uniform(-5, 5);
    f.face_ax = w * 0.33 + rng.uniform(-6, 6);
    f.face_ay = h * 0.36 + rng.uniform(-8, 8);
    f.skin = rng.uniform(0.52, 0.68);
    f.eye_dx = w * 0.135 + rng.uniform(-4, 4);
    f.eye_y = h * 0.43 + rng.uniform(-5, 5);
    f.eye_rx = rng.uniform(8, 12);
    f.eye_ry = rng.uniform(4, 6);
    f.brow_gap = rng.uniform(9, 14);
    f.mouth_y = h * 0.72 + rng.uniform(-6, 6);
    f.mouth_w = rng.uniform(16, 26);
    f.nose_len = rng.uniform(24, 34);
    for (int i = 0; i < 3; ++i) {
        const double freq = rng.uniform(0.08, 0.3), theta = rng.uniform(0.0, std::numbers::pi);
        f.waves.push_back({freq * std::cos(theta), freq * std::sin(theta), rng.uniform(0.0, 2 * std::numbers::pi),
                           rng.uniform(0.006, 0.016)});
    }
    std::vector<double> noise(static_cast<std::size_t>(w) * h);
    for (auto& v : noise) v = 0.5 + 0.12 * rng.normal();
    for (auto& v : noise) v = std::clamp(v, 0.0, 1.0);
    const auto smooth = gaussian_blur(GrayImage(w, h, std::move(noise)), 0.8);
    f.pores.reserve(smooth.pixels().size());
    for (double v : smooth.pixels()) f.pores.push_back(v - 0.5);
    return f;
}

/// Render one capture of an identity: geometry and texture come from the
/// identity, illumination and sensor noise from the capture stream.
inline GrayImage render_face(const FaceParams& f, int w, int h, Rng& capture_rng, double sensor_noise) {
    const double gain = capture_rng.uniform(0.92, 1.08);
    const double offset = capture_rng.uniform(-0.03, 0.03);
    const double light = capture_rng.uniform(-0.04, 0.04);
    auto blob = [](double dx, double dy, double rx, double ry) {
        const double d = (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry);
        return 1.0 / (1.0 + std::exp((d - 1.0) * 6.0));
    };
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = (x - f.face_cx) / f.face_ax, v = (y - f.face_cy) / f.face_ay;
            double bg = 0.22 + 0.08 * y / h;
            const double r2 = u * u + v * v;
            const double inside = 1.0 / (1.0 + std::exp((std::sqrt(r2) - 1.0) * 40.0));
            double skin = f.skin - 0.10 * r2 + light * u;
            for (const auto& wv : f.waves) skin += wv.amp * std::sin(wv.fx * x + wv.fy * y + wv.phase);
            skin += 0.06 * f.pores[pixel_index(x, y, w)];
            for (int side : {-1, 1}) {
                const double ex = f.face_cx + side * f.eye_dx;
                skin -= 0.28 * blob(x - ex, y - f.eye_y, f.eye_rx, f.eye_ry);
                skin -= 0.15 * blob(x - ex, y - f.eye_y, f.eye_ry * 0.8, f.eye_ry * 0.8);
                skin -= 0.18 * blob(x - ex, y - (f.eye_y - f.brow_gap), f.eye_rx * 1.1, 2.2);
            }
            skin -= 0.08 * blob(x - f.face_cx, y - (f.eye_y + f.nose_len * 0.5), 3.0, f.nose_len * 0.5);
            for (int side : {-1, 1})
                skin -= 0.12 * blob(x - (f.face_cx + side * 6.0), y - (f.eye_y + f.nose_len), 3.0, 2.0);
            skin -= 0.22 * blob(x - f.face_cx, y - f.mouth_y, f.mouth_w, 3.5);
            double val = inside * skin + (1.0 - inside) * bg;
            val = gain * val + offset + sensor_noise * capture_rng.normal();
            px[pixel_index(x, y, w)] = std::clamp(val, 0.0, 1.0);
        }
    return quantize8(GrayImage(w, h, std::move(px)));
}

struct Corpus {
    DatasetManifest manifest;
    std::vector<GrayImage> images;  ///< parallel to manifest.entries
};

inline std::string subject_tag(int i) {
    std::string s = std::to_string(i);
    return "s" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

/// Deterministic desk-scale morph corpus. Each subject gets a procedural face
/// and captures_per_subject bona fide captures. Subjects are shuffled into
/// groups of group_size and every pair inside a group is morphed (from each
/// subject's first capture) once per simulated tool.
inline Corpus generate_corpus(std::uint64_t seed, int n_subjects, const CorpusOptions& opt = {}) {
    if (n_subjects < 4) throw ArgumentError("synthetic corpus needs at least 4 subjects");
    if (opt.group_size < 2) throw ArgumentError("group size must be >= 2");
    if (opt.captures_per_subject < 1) throw ArgumentError("need at least one capture per subject");
    Corpus c;
    c.manifest.name = "synthetic-" + std::to_string(seed);
    const int w = opt.width, h = opt.height;

    std::vector<FaceParams> faces;
    std::vector<GrayImage> first_capture;
    for (int s = 0; s < n_subjects; ++s) {
        Rng face_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(s)));
        faces.push_back(random_face(face_rng, w, h));
        for (int k = 0; k < opt.captures_per_subject; ++k) {
            Rng cap_rng(derive_seed(seed, 100000 + static_cast<std::uint64_t>(s) * 64 + static_cast<std::uint64_t>(k)));
            auto img = render_face(faces.back(), w, h, cap_rng, opt.sensor_noise);
            if (k == 0) first_capture.push_back(img);
            c.manifest.entries.push_back(
                {"bonafide/" + subject_tag(s) + "_" + std::to_string(k) + ".pgm", Label::bonafide, "", subject_tag(s)});
            c.images.push_back(std::move(img));
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n_subjects));
    std::iota(order.begin(), order.end(), 0);
    Rng pair_rng(derive_seed(seed, 7));
    pair_rng.shuffle(order);
    std::vector<std::pair<int, int>> pairs;
    const int n_groups = std::max(1, n_subjects / opt.group_size);
    for (int g = 0; g < n_groups; ++g) {
        const int begin = g * opt.group_size;
        const int end = g == n_groups - 1 ? n_subjects : begin + opt.group_size;
        for (int i = begin; i < end; ++i)
            for (int j = i + 1; j < end; ++j)
                pairs.emplace_back(std::min(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]),
                                   std::max(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]));
    }
    std::sort(pairs.begin(), pairs.end());

    for (std::size_t t = 0; t < opt.tools.size(); ++t) {
        const auto& tool = opt.tools[t];
        Rng tool_rng(derive_seed(seed, 500 + t));
        for (const auto& [a, b] : pairs) {
            const auto blended = synth_morph(first_capture[static_cast<std::size_t>(a)],
                                             first_capture[static_cast<std::size_t>(b)], opt.alpha);
            auto img = quantize8(apply_tool(blended, tool, tool_rng));
            c.manifest.entries.push_back({"morph/" + tool.name + "/" + subject_tag(a) + "_" + subject_tag(b) + ".pgm",
                                          Label::morph, tool.name, subject_tag(a) + "+" + subject_tag(b)});
            c.images.push_back(std::move(img));
        }
    }
    c.manifest.validate();
    return c;
}

/// Write images and manifest.csv under dir. Returns the manifest path.
inline std::string write_corpus(const Corpus& c, const std::string& dir) {
    namespace fs = std::filesystem;
    for (std::size_t i = 0; i < c.images.size(); ++i) {
        const fs::path p = fs::path(dir) / c.manifest.entries[i].path;
        fs::create_directories(p.parent_path());
        save_pgm(c.images[i], p.string());
    }
    const auto manifest_path = (fs::path(dir) / "manifest.csv").string();
    save_manifest(c.manifest, manifest_path);
    return manifest_path;
}

/// synth_corpus: generate and persist in one step.
inline Corpus synth_corpus(std::uint64_t seed, int n_subjects, const std::string& dir, const CorpusOptions& opt = {}) {
    auto c = generate_corpus(seed, n_subjects, opt);
    write_corpus(c, dir);
    return c;
}

}  // namespace madsel
