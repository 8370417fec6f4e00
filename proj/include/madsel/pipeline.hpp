#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "madsel/error.hpp"
#include "madsel/features.hpp"
#include "madsel/forest.hpp"
#include "madsel/manifest.hpp"
#include "madsel/metrics.hpp"
#include "madsel/parallel.hpp"
#include "madsel/protocol.hpp"
#include "madsel/rng.hpp"
#include "madsel/selection.hpp"
#include "madsel/store.hpp"
#include "madsel/synth.hpp"
#include "madsel/viz.hpp"

namespace madsel {

struct ExperimentConfig {
    ExtractorKind extractor = ExtractorKind::ulbp_all;
    HogConfig hog;
    std::uint32_t n_bins = 0;
    Method method = Method::cmim2;
    std::size_t k = 0;          ///< 0 = k_fraction of the feature count
    double k_fraction = 0.1;
    std::size_t n_trees = 300;
    std::uint64_t seed = 0;
    double train_fraction = 0.6;
    double test_fraction = 0.4;
    std::vector<std::size_t> sweep_grid;  ///< empty = 100, 200, ... up to min(1000, features)
    bool loo = true;
    std::string output_dir = "out";

    void validate() const {
        if (std::abs(train_fraction + test_fraction - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train fraction must be in (0, 1)");
        if (k == 0 && !(k_fraction > 0.0 && k_fraction <= 1.0)) throw ArgumentError("k must be >= 1");
        if (n_trees < 1) throw ArgumentError("forest needs at least one tree");
    }

    /// Seeds fanned out from the master seed.
    std::uint64_t split_seed() const { return derive_seed(seed, stream::split); }
    std::uint64_t forest_seed() const { return derive_seed(seed, stream::forest); }
    std::uint64_t selector_seed() const { return derive_seed(seed, stream::random_selector); }

    DetectorConfig detector() const {
        DetectorConfig d;
        d.method = method;
        d.k = k;
        d.k_fraction = k_fraction;
        d.selection.n_bins = n_bins;
        d.selection.seed = selector_seed();
        d.forest.n_trees = n_trees;
        d.forest.seed = forest_seed();
        return d;
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"extractor", std::string(to_string(c.extractor))},
            {"hog", {{"grid_cols", c.hog.grid_cols}, {"grid_rows", c.hog.grid_rows}, {"orientations", c.hog.orientations}}},
            {"n_bins", c.n_bins},
            {"method", std::string(to_string(c.method))},
            {"k", c.k},
            {"k_fraction", c.k_fraction},
            {"n_trees", c.n_trees},
            {"seed", c.seed},
            {"train_fraction", c.train_fraction},
            {"test_fraction", c.test_fraction},
            {"sweep_grid", c.sweep_grid},
            {"loo", c.loo},
            {"output_dir", c.output_dir}};
}

/// Keys absent from the JSON keep their current values.
inline void merge_config(ExperimentConfig& c, const nlohmann::json& j) {
    try {
        if (j.contains("extractor")) c.extractor = parse_extractor(j.at("extractor").get<std::string>());
        if (j.contains("hog")) {
            const auto& h = j.at("hog");
            if (h.contains("grid_cols")) c.hog.grid_cols = h.at("grid_cols").get<int>();
            if (h.contains("grid_rows")) c.hog.grid_rows = h.at("grid_rows").get<int>();
            if (h.contains("orientations")) c.hog.orientations = h.at("orientations").get<int>();
        }
        if (j.contains("n_bins")) c.n_bins = j.at("n_bins").get<std::uint32_t>();
        if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
        if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
        if (j.contains("k_fraction")) c.k_fraction = j.at("k_fraction").get<double>();
        if (j.contains("n_trees")) c.n_trees = j.at("n_trees").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
        if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
        if (j.contains("sweep_grid")) c.sweep_grid = j.at("sweep_grid").get<std::vector<std::size_t>>();
        if (j.contains("loo")) c.loo = j.at("loo").get<bool>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad config: ") + e.what());
    }
}

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

/// Extract one feature row per image, in parallel across images.
inline FeatureStore extract_store(const std::vector<GrayImage>& images, const std::vector<std::string>& row_ids,
                                  ExtractorKind kind, const HogConfig& hog_cfg = {}) {
    if (images.empty()) throw ArgumentError("no images to extract");
    std::vector<FeatureVector> rows(images.size());
    parallel_for(images.size(), [&](std::size_t i) { rows[i] = extract(images[i], kind, hog_cfg); });
    FeatureStore s;
    s.extractor = std::string(to_string(kind));
    s.row_ids = row_ids;
    s.layout = rows.front().layout;
    s.matrix = FeatureMatrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].layout != s.layout) throw ArgumentError("images produced different feature layouts (size mismatch?)");
        s.matrix.set_row(i, rows[i].values);
    }
    return s;
}

inline std::vector<GrayImage> load_manifest_images(const DatasetManifest& m, const std::string& manifest_path) {
    std::vector<GrayImage> images(m.entries.size());
    for (std::size_t i = 0; i < images.size(); ++i) images[i] = load_gray(resolve_path(manifest_path, m.entries[i].path));
    return images;
}

struct RunSummary {
    std::map<std::string, std::string> artifacts;  ///< file name -> SHA-256
    nlohmann::json metrics;
    std::string digest;  ///< SHA-256 over the artifact table
};

namespace detail {

class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void bytes(const std::string& name, std::span<const std::uint8_t> data) {
        detail::write_file((dir_ / name).string(), data);
        hashes_[name] = sha256_hex(data);
    }
    void text(const std::string& name, const std::string& s) {
        bytes(name, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }
    const std::map<std::string, std::string>& hashes() const { return hashes_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> hashes_;
};

inline LabelColumn labels_of(const LabelColumn& y, const std::vector<std::size_t>& rows) {
    std::vector<std::uint8_t> v;
    for (auto r : rows) v.push_back(y.labels.at(r));
    return LabelColumn(std::move(v));
}

}  // namespace detail

/// extraction -> split -> selection -> forest -> evaluation -> visualisation.
/// Every artifact lands in cfg.output_dir; run_summary.json lists their hashes.
/// A failing stage leaves a FAILED marker naming the stage and throws StageError.
inline RunSummary run_pipeline(const ExperimentConfig& cfg, const DatasetManifest& manifest,
                               const std::vector<GrayImage>& images) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    std::string stage = "config";
    auto fail_marker = [&](const std::string& what) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        std::ofstream(dir / "FAILED") << stage << ": " << what << "\n";
    };
    try {
        cfg.validate();
        manifest.validate();
        if (images.size() != manifest.entries.size()) throw ArgumentError("image count does not match the manifest");
        fs::create_directories(dir);
        fs::remove(dir / "FAILED");
        detail::ArtifactWriter out(dir);
        RunSummary summary;
        const auto ext = std::string(to_string(cfg.extractor));
        const auto y = manifest.labels();

        stage = "extract";
        std::vector<std::string> ids;
        for (const auto& e : manifest.entries) ids.push_back(e.path);
        const FeatureStore all = extract_store(images, ids, cfg.extractor, cfg.hog);

        stage = "split";
        const Split split = subject_disjoint_split(manifest, cfg.train_fraction, cfg.split_seed());
        out.text("split.json", nlohmann::json{{"train", split.train}, {"test", split.test}}.dump() + "\n");
        for (const auto& [part, rows] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
            FeatureStore s;
            s.extractor = ext;
            s.layout = all.layout;
            s.matrix = all.matrix.select_rows(*rows);
            for (auto r : *rows) s.row_ids.push_back(ids[r]);
            out.bytes(std::string("features_") + ext + "_" + part + ".store", encode_store(s));
            std::ostringstream lab;
            for (auto r : *rows) lab << int(y.labels[r]) << '\n';
            out.text(std::string("labels_") + part + ".txt", lab.str());
        }

        stage = "select";
        const auto det_cfg = cfg.detector();
        const Detector det = fit_detector(all.matrix, y, split.train, det_cfg);
        out.text("selection.json", to_json(det.selection).dump(2) + "\n");

        stage = "train";
        out.bytes("model.bin", serialize(det.model));

        stage = "eval";
        const auto test_bona = rows_of(manifest, split.test, "");
        std::vector<std::size_t> test_attack;
        for (auto i : split.test)
            if (manifest.entries[i].label == Label::morph) test_attack.push_back(i);
        std::ostringstream metrics;
        metrics << "test_tool,d_eer_percent,bpcer10_percent,bpcer20_percent\n";
        auto report = [&](const std::string& tag, const std::vector<std::size_t>& attack) {
            const auto s = score_rows(det, all.matrix, test_bona, attack);
            const double e = d_eer(s), b10 = bpcer10(s), b20 = bpcer20(s);
            metrics << tag << ',' << fmt_rate(100 * e) << ',' << fmt_rate(100 * b10) << ',' << fmt_rate(100 * b20) << '\n';
            out.text("det_" + tag + ".csv", det_csv(det_curve(s)));
            summary.metrics[tag] = {{"d_eer", e}, {"bpcer10", b10}, {"bpcer20", b20}};
        };
        report("all", test_attack);
        for (const auto& tool : manifest.tools()) report(tool, rows_of(manifest, split.test, tool));
        out.text("metrics.csv", metrics.str());

        if (cfg.loo && manifest.tools().size() >= 2) {
            const auto tables = run_loo_protocol(all.matrix, manifest, split, det_cfg);
            out.text("loo.csv", protocol_csv(tables));
            summary.metrics["loo_average_d_eer"] = average_d_eer(tables);
        }

        stage = "sweep";
        {
            const auto grid = cfg.sweep_grid.empty() ? default_sweep_grid(det.features.size()) : cfg.sweep_grid;
            const auto train_x = all.matrix.select_rows(split.train);
            const auto test_x = all.matrix.select_rows(split.test);
            const auto rows = sweep_feature_counts(det.selection, grid, train_x, detail::labels_of(y, split.train),
                                                   test_x, detail::labels_of(y, split.test), det_cfg.forest);
            out.text("sweep.csv", sweep_csv(rows));
        }

        stage = "viz";
        {
            const std::size_t base = test_bona.empty() ? 0 : test_bona.front();
            const auto marks = locate_features(*all.layout, det.features);
            out.bytes("overlay.ppm", encode_ppm(render_overlay(images[base], marks, det.features.size())));
            if (cfg.extractor == ExtractorKind::hog)
                out.bytes("hog_glyphs.ppm", encode_ppm(render_hog_glyphs(hog(images[base], cfg.hog))));
        }

        stage = "summary";
        summary.artifacts = out.hashes();
        const nlohmann::json table = summary.artifacts;
        const std::string table_text = table.dump();
        summary.digest = sha256_hex(
            std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(table_text.data()), table_text.size()));
        const nlohmann::json doc = {{"config", to_json(cfg)},
                                    {"dataset", manifest.name},
                                    {"artifacts", table},
                                    {"metrics", summary.metrics},
                                    {"digest", summary.digest}};
        write_text((dir / "run_summary.json").string(), doc.dump(2) + "\n");
        return summary;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        fail_marker(e.what());
        throw StageError(stage, e.what());
    }
}

inline RunSummary run_pipeline(const ExperimentConfig& cfg, const std::string& manifest_path) {
    DatasetManifest manifest;
    std::vector<GrayImage> images;
    try {
        manifest = load_manifest(manifest_path);
        images = load_manifest_images(manifest, manifest_path);
    } catch (const std::exception& e) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        std::ofstream(std::filesystem::path(cfg.output_dir) / "FAILED") << "load: " << e.what() << "\n";
        throw StageError("load", e.what());
    }
    return run_pipeline(cfg, manifest, images);
}

}  // namespace madsel
