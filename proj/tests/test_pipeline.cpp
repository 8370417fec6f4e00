#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "madsel/madsel.hpp"

using namespace madsel;
namespace fs = std::filesystem;

namespace {

std::vector<double> px(const GrayImage& g) { return {g.pixels().begin(), g.pixels().end()}; }

CorpusOptions small_options(int tools = 2) {
    CorpusOptions o;
    o.width = 60;
    o.height = 80;
    o.tools.resize(static_cast<std::size_t>(tools));
    return o;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("madsel_pipeline_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig c;
    c.seed = 3;
    c.k = 20;
    c.n_trees = 15;
    c.hog.grid_cols = 6;
    c.hog.grid_rows = 8;
    c.sweep_grid = {5, 10, 20};
    c.output_dir = out.string();
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(SynthMorph, Examples) {
    const GrayImage a(2, 1, {0.2, 1.0}), b(2, 1, {0.6, 0.0});
    EXPECT_EQ(px(synth_morph(a, b, 1.0)), px(a));
    EXPECT_EQ(px(synth_morph(a, b, 0.0)), px(b));
    const auto m = synth_morph(a, b);
    EXPECT_NEAR(m.pixels()[0], 0.4, 1e-12);
    EXPECT_NEAR(m.pixels()[1], 0.5, 1e-12);
    EXPECT_THROW(synth_morph(a, GrayImage(1, 1, {0.0})), ArgumentError);
    EXPECT_THROW(synth_morph(a, b, 1.5), ArgumentError);
}

TEST(Synth, Deterministic) {
    const auto a = generate_corpus(11, 8, small_options()), b = generate_corpus(11, 8, small_options());
    EXPECT_EQ(a.manifest.entries, b.manifest.entries);
    ASSERT_EQ(a.images.size(), b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_EQ(px(a.images[i]), px(b.images[i]));
    const auto c = generate_corpus(12, 8, small_options());
    EXPECT_NE(px(a.images[0]), px(c.images[0]));
}

TEST(Synth, IdentityToolIsPlainBlend) {
    auto opt = small_options(1);
    ASSERT_EQ(opt.tools[0].kind, SimulatedTool::Kind::none);
    const auto c = generate_corpus(5, 4, opt);
    const auto& m = c.manifest;
    auto first_capture = [&](const std::string& subject) -> const GrayImage& {
        for (std::size_t i = 0; i < m.entries.size(); ++i)
            if (m.entries[i].subject == subject) return c.images[i];
        throw std::logic_error("missing subject");
    };
    int checked = 0;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        if (m.entries[i].label != Label::morph) continue;
        const auto subs = split_subjects(m.entries[i].subject);
        ASSERT_EQ(subs.size(), 2u);
        const auto expect = quantize8(synth_morph(first_capture(subs[0]), first_capture(subs[1])));
        EXPECT_EQ(px(c.images[i]), px(expect));
        ++checked;
    }
    EXPECT_EQ(checked, 6);
}

TEST(Synth, ManifestInvariants) {
    const auto c = generate_corpus(7, 10, small_options(3));
    const auto& m = c.manifest;
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.tools(), (std::vector<std::string>{"blend", "blur", "noise"}));
    std::size_t bona = 0;
    std::map<std::string, std::size_t> per_tool;
    for (const auto& e : m.entries) {
        if (e.label == Label::bonafide) {
            ++bona;
            EXPECT_EQ(split_subjects(e.subject).size(), 1u);
        } else {
            ++per_tool[e.tool];
            const auto subs = split_subjects(e.subject);
            ASSERT_EQ(subs.size(), 2u);
            EXPECT_NE(subs[0], subs[1]);
        }
    }
    EXPECT_EQ(bona, 20u);
    // 10 subjects in groups of 4 and 6: 6 + 15 pairs
    for (const auto& [tool, n] : per_tool) EXPECT_EQ(n, 21u) << tool;
    for (const auto& img : c.images) {
        EXPECT_EQ(img.width(), 60);
        EXPECT_EQ(img.height(), 80);
    }
    EXPECT_THROW(generate_corpus(1, 3), ArgumentError);
}

TEST(Synth, WrittenCorpusLoadsBack) {
    const auto dir = scratch("corpus");
    const auto c = generate_corpus(2, 4, small_options());
    const auto path = write_corpus(c, dir.string());
    const auto m = load_manifest(path);
    EXPECT_EQ(m.entries, c.manifest.entries);
    const auto images = load_manifest_images(m, path);
    for (std::size_t i = 0; i < images.size(); ++i) EXPECT_EQ(px(images[i]), px(c.images[i]));
}

TEST(Config, MergeKeepsAbsentKeys) {
    ExperimentConfig c;
    c.seed = 42;
    merge_config(c, nlohmann::json::parse(R"({"method": "mrmr", "k": 7, "hog": {"orientations": 6}})"));
    EXPECT_EQ(c.method, Method::mrmr);
    EXPECT_EQ(c.k, 7u);
    EXPECT_EQ(c.hog.orientations, 6);
    EXPECT_EQ(c.hog.grid_cols, 10);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.n_trees, 300u);
    ExperimentConfig d;
    merge_config(d, to_json(c));
    EXPECT_EQ(to_json(d), to_json(c));
    EXPECT_THROW(merge_config(c, nlohmann::json::parse(R"({"k": "many"})")), FormatError);
    EXPECT_THROW(merge_config(c, nlohmann::json::parse(R"({"method": "lasso"})")), ArgumentError);
}

TEST(Config, Validate) {
    ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    c.train_fraction = 0.7;
    EXPECT_THROW(c.validate(), ArgumentError);
    c.test_fraction = 0.3;
    EXPECT_NO_THROW(c.validate());
    c.n_trees = 0;
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Config, SeedStreamsDiffer) {
    ExperimentConfig c;
    c.seed = 1;
    EXPECT_NE(c.split_seed(), c.forest_seed());
    EXPECT_NE(c.forest_seed(), c.selector_seed());
    EXPECT_EQ(c.detector().forest.seed, c.forest_seed());
}

TEST(Sha256, KnownVector) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Store, RoundTrip) {
    const auto c = generate_corpus(3, 4, small_options(1));
    const std::vector<GrayImage> imgs(c.images.begin(), c.images.begin() + 3);
    const auto s = extract_store(imgs, {"a", "b", "c"}, ExtractorKind::ulbp_vert);
    EXPECT_EQ(s.matrix.cols, 472u);
    const auto bytes = encode_store(s);
    const auto back = decode_store(bytes);
    EXPECT_EQ(back.extractor, "ulbp_vert");
    EXPECT_EQ(back.row_ids, s.row_ids);
    EXPECT_EQ(back.matrix.data, s.matrix.data);
    EXPECT_EQ(back.layout, s.layout);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_store(bad), FormatError);
    bad = bytes;
    bad.pop_back();
    EXPECT_THROW(decode_store(bad), FormatError);
}

TEST(Pipeline, RunsAndIsDeterministic) {
    const auto c = generate_corpus(9, 8, small_options());
    const auto dir_a = scratch("run_a"), dir_b = scratch("run_b");
    const auto a = run_pipeline(small_config(dir_a), c.manifest, c.images);
    const auto b = run_pipeline(small_config(dir_b), c.manifest, c.images);
    EXPECT_EQ(a.digest, b.digest);
    EXPECT_EQ(a.artifacts, b.artifacts);
    for (const char* name : {"split.json", "features_ulbp_all_train.store", "features_ulbp_all_test.store",
                             "labels_train.txt", "labels_test.txt", "selection.json", "model.bin", "det_all.csv",
                             "det_blend.csv", "det_blur.csv", "metrics.csv", "loo.csv", "sweep.csv", "overlay.ppm"}) {
        EXPECT_TRUE(fs::exists(dir_a / name)) << name;
        EXPECT_EQ(a.artifacts.count(name), 1u) << name;
    }
    EXPECT_FALSE(fs::exists(dir_a / "FAILED"));
    const auto summary = nlohmann::json::parse(slurp(dir_a / "run_summary.json"));
    EXPECT_EQ(summary.at("digest").get<std::string>(), a.digest);
    EXPECT_EQ(summary.at("config").at("k").get<int>(), 20);
    EXPECT_TRUE(a.metrics.contains("loo_average_d_eer"));
    const auto sel = load_selection((dir_a / "selection.json").string());
    EXPECT_EQ(sel.order.size(), 20u);
    const auto sweep = slurp(dir_a / "sweep.csv");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 4);
    const auto train = load_store((dir_a / "features_ulbp_all_train.store").string());
    EXPECT_EQ(train.matrix.rows, load_labels((dir_a / "labels_train.txt").string()).size());
}

TEST(Pipeline, DisabledSelectionMatchesBaselineForest) {
    const auto c = generate_corpus(4, 8, small_options());
    const auto dir = scratch("none");
    auto cfg = small_config(dir);
    cfg.method = Method::none;
    cfg.loo = false;
    cfg.sweep_grid = {472};
    run_pipeline(cfg, c.manifest, c.images);
    const auto store = extract_store(c.images, std::vector<std::string>(c.images.size()), ExtractorKind::ulbp_all);
    const auto split = subject_disjoint_split(c.manifest, cfg.train_fraction, cfg.split_seed());
    const auto y = c.manifest.labels();
    std::vector<std::uint8_t> ytr;
    for (auto i : split.train) ytr.push_back(y.labels[i]);
    const auto base = train_forest(store.matrix.select_rows(split.train), LabelColumn(ytr), cfg.detector().forest);
    EXPECT_EQ(serialize(load_forest((dir / "model.bin").string())), serialize(base));
}

TEST(Pipeline, SweepGridOnFullStore) {
    const auto c = generate_corpus(6, 8, small_options());
    const auto dir = scratch("sweep");
    auto cfg = small_config(dir);
    cfg.method = Method::cmim;
    cfg.k = 400;
    cfg.loo = false;
    cfg.sweep_grid = {100, 200, 300, 400};
    run_pipeline(cfg, c.manifest, c.images);
    const auto sweep = slurp(dir / "sweep.csv");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 5);
    EXPECT_NE(sweep.find("\n400,"), std::string::npos);
}

TEST(Pipeline, HogWritesGlyphs) {
    const auto c = generate_corpus(8, 8, small_options());
    const auto dir = scratch("hog");
    auto cfg = small_config(dir);
    cfg.extractor = ExtractorKind::hog;
    cfg.loo = false;
    const auto r = run_pipeline(cfg, c.manifest, c.images);
    EXPECT_EQ(r.artifacts.count("hog_glyphs.ppm"), 1u);
}

TEST(Pipeline, FailureLeavesMarker) {
    const auto c = generate_corpus(1, 4, small_options());
    const auto dir = scratch("fail");
    auto images = c.images;
    images.pop_back();
    try {
        run_pipeline(small_config(dir), c.manifest, images);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "config");
    }
    EXPECT_EQ(slurp(dir / "FAILED").rfind("config: ", 0), 0u);

    // images too small for the largest uLBP radius fail in extraction
    std::vector<GrayImage> tiny(c.images.size(), GrayImage(10, 10, std::vector<double>(100, 0.5)));
    try {
        run_pipeline(small_config(dir), c.manifest, tiny);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "extract");
    }
    EXPECT_EQ(slurp(dir / "FAILED").rfind("extract: ", 0), 0u);
}

TEST(Pipeline, MissingManifestFailsInLoad) {
    const auto dir = scratch("load");
    try {
        run_pipeline(small_config(dir), (dir / "nope.csv").string());
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
    }
    EXPECT_TRUE(fs::exists(dir / "FAILED"));
}
