// madsel command-line driver.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "madsel/madsel.hpp"

using namespace madsel;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kExtractors{"raw", "hog", "ulbp_all", "ulbp_vert", "ulbp_hor", "fusion"};
const std::vector<std::string> kMethods{"mrmr", "nmifs", "cmim", "cmim2", "random", "none"};

void print_metrics(const std::string& tag, const ScoreSet& s) {
    std::printf("%-10s D-EER %6.2f%%  BPCER10 %6.2f%%  BPCER20 %6.2f%%\n", tag.c_str(), 100 * d_eer(s),
                100 * bpcer10(s), 100 * bpcer20(s));
}

// Columns the model was trained on: the selection prefix, or every column.
std::vector<std::size_t> model_columns(const ForestModel& m, const std::string& selection_path, std::size_t cols) {
    if (!selection_path.empty()) return load_selection(selection_path).prefix(m.n_features);
    if (m.n_features != cols)
        throw ArgumentError("model expects " + std::to_string(m.n_features) + " features, store has " +
                            std::to_string(cols) + " (pass --selection)");
    std::vector<std::size_t> all(cols);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

LabelColumn subset(const LabelColumn& y, const std::vector<std::size_t>& rows) {
    std::vector<std::uint8_t> v;
    for (auto r : rows) v.push_back(y.labels.at(r));
    return LabelColumn(std::move(v));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Morphing attack detection with mutual-information feature selection"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus with simulated morphing tools");
    std::uint64_t synth_seed = 0;
    int synth_subjects = 40;
    std::string synth_out = "corpus";
    synth->add_option("--seed", synth_seed, "Master seed")->required();
    synth->add_option("--subjects", synth_subjects, "Number of subjects")->check(CLI::Range(4, 100000));
    synth->add_option("--out", synth_out, "Output directory");

    // extract
    auto* ext = app.add_subcommand("extract", "Extract a feature store from a manifest");
    std::string ext_manifest, ext_kind = "ulbp_all", ext_out, ext_labels, ext_part = "all";
    std::uint64_t ext_seed = 0;
    double ext_train_fraction = 0.6;
    HogConfig ext_hog;
    ext->add_option("--manifest", ext_manifest, "Manifest CSV")->required();
    ext->add_option("--extractor", ext_kind, "Feature extractor")->check(CLI::IsMember(kExtractors));
    ext->add_option("--out", ext_out, "Feature store path")->required();
    ext->add_option("--labels", ext_labels, "Also write the 0/1 labels file here");
    ext->add_option("--part", ext_part, "Rows to keep: all, or one side of the subject-disjoint split")
        ->check(CLI::IsMember({"all", "train", "test"}));
    ext->add_option("--seed", ext_seed, "Master seed for --part");
    ext->add_option("--train-fraction", ext_train_fraction, "Training share for --part");
    ext->add_option("--hog-cols", ext_hog.grid_cols, "HOG grid columns");
    ext->add_option("--hog-rows", ext_hog.grid_rows, "HOG grid rows");
    ext->add_option("--hog-orientations", ext_hog.orientations, "HOG orientation bins");

    // select
    auto* sel = app.add_subcommand("select", "Rank features of a store");
    std::string sel_method = "cmim2", sel_features, sel_labels, sel_out;
    std::size_t sel_k = 0;
    SelectionParams sel_params;
    sel->add_option("--method", sel_method, "Selection criterion")->check(CLI::IsMember(kMethods));
    sel->add_option("--k", sel_k, "Features to select (default 10% of the store)");
    sel->add_option("--features", sel_features, "Feature store")->required();
    sel->add_option("--labels", sel_labels, "Labels file")->required();
    sel->add_option("--out", sel_out, "Selection JSON")->required();
    sel->add_option("--bins", sel_params.n_bins, "Discretization bins (0 = from sample count)");
    sel->add_option("--seed", sel_params.seed, "Seed for the random selector");
    sel->add_flag("--miq", "Use the quotient form of mRMR");

    // train
    auto* train = app.add_subcommand("train", "Fit a random forest");
    std::string tr_features, tr_labels, tr_selection, tr_out;
    std::size_t tr_k = 0;
    ForestParams tr_forest;
    train->add_option("--features", tr_features, "Feature store")->required();
    train->add_option("--labels", tr_labels, "Labels file")->required();
    train->add_option("--selection", tr_selection, "Train on the top-k of this selection");
    train->add_option("--k", tr_k, "Selection prefix length (default: all selected)");
    train->add_option("--trees", tr_forest.n_trees, "Number of trees")->check(CLI::PositiveNumber);
    train->add_option("--seed", tr_forest.seed, "Forest seed");
    train->add_option("--out", tr_out, "Model file")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Score a model, or run leave-one-tool-out");
    std::string ev_method = "cmim2", ev_protocol = "simple", ev_model, ev_features, ev_labels, ev_selection, ev_manifest, ev_out;
    std::vector<std::string> ev_train_tools;
    ExperimentConfig ev_cfg;
    eval->add_option("--protocol", ev_protocol, "simple: score a trained model; loo: leave-one-tool-out")
        ->check(CLI::IsMember({"simple", "loo"}));
    eval->add_option("--model", ev_model, "Model file (simple)");
    eval->add_option("--features", ev_features, "Feature store")->required();
    eval->add_option("--labels", ev_labels, "Labels file (simple)");
    eval->add_option("--selection", ev_selection, "Selection used in training (simple)");
    eval->add_option("--manifest", ev_manifest, "Manifest matching the store rows (loo)");
    eval->add_option("--train-tool", ev_train_tools, "Train on this tool only (loo, repeatable)");
    eval->add_option("--method", ev_method, "Selection criterion (loo)")->check(CLI::IsMember(kMethods));
    eval->add_option("--k", ev_cfg.k, "Selected features (loo)");
    eval->add_option("--k-fraction", ev_cfg.k_fraction, "Share of features when --k is 0 (loo)");
    eval->add_option("--trees", ev_cfg.n_trees, "Number of trees (loo)");
    eval->add_option("--seed", ev_cfg.seed, "Master seed (loo)");
    eval->add_option("--train-fraction", ev_cfg.train_fraction, "Training share (loo)");
    eval->add_option("--out", ev_out, "CSV output: DET curve (simple) or D-EER grid (loo)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "D-EER against the number of selected features");
    std::string sw_selection, sw_train_features, sw_train_labels, sw_test_features, sw_test_labels, sw_out;
    std::vector<std::size_t> sw_grid;
    ForestParams sw_forest;
    sweep->add_option("--selection", sw_selection, "Selection JSON")->required();
    sweep->add_option("--train-features", sw_train_features, "Training store")->required();
    sweep->add_option("--train-labels", sw_train_labels, "Training labels")->required();
    sweep->add_option("--test-features", sw_test_features, "Test store")->required();
    sweep->add_option("--test-labels", sw_test_labels, "Test labels")->required();
    sweep->add_option("--grid", sw_grid, "Feature counts (default 100, 200, ... up to 1000)");
    sweep->add_option("--trees", sw_forest.n_trees, "Number of trees")->check(CLI::PositiveNumber);
    sweep->add_option("--seed", sw_forest.seed, "Forest seed");
    sweep->add_option("--out", sw_out, "CSV output");

    // viz
    auto* viz = app.add_subcommand("viz", "Paint selected features over a face image");
    std::string vz_selection, vz_image, vz_out, vz_kind = "ulbp_all", vz_glyphs;
    std::size_t vz_top = 0;
    HogConfig vz_hog;
    viz->add_option("--selection", vz_selection, "Selection JSON")->required();
    viz->add_option("--image", vz_image, "Face image (PGM or PNG)")->required();
    viz->add_option("--out", vz_out, "Overlay (.png or .ppm)")->required();
    viz->add_option("--extractor", vz_kind, "Extractor the selection was made on")->check(CLI::IsMember(kExtractors));
    viz->add_option("--top", vz_top, "Draw only the first N selected (default all)");
    viz->add_option("--glyphs", vz_glyphs, "Also write HOG glyphs of the image here");
    viz->add_option("--hog-cols", vz_hog.grid_cols, "HOG grid columns");
    viz->add_option("--hog-rows", vz_hog.grid_rows, "HOG grid rows");

    // run
    auto* run = app.add_subcommand("run", "Full pipeline: extract, split, select, train, evaluate, visualise");
    std::string run_config, run_manifest, run_kind, run_method;
    int run_synthetic = 0;
    ExperimentConfig run_cfg;
    std::uint64_t run_seed = 0;
    run->add_option("--config", run_config, "JSON config; flags below override it");
    run->add_option("--seed", run_seed, "Master seed")->required();
    auto* run_src = run->add_option("--manifest", run_manifest, "Manifest CSV");
    run->add_option("--synthetic", run_synthetic, "Generate a synthetic corpus with this many subjects instead")
        ->excludes(run_src)
        ->check(CLI::Range(4, 100000));
    auto* o_kind = run->add_option("--extractor", run_kind, "Feature extractor")->check(CLI::IsMember(kExtractors));
    auto* o_method = run->add_option("--method", run_method, "Selection criterion")->check(CLI::IsMember(kMethods));
    auto* o_k = run->add_option("--k", run_cfg.k, "Selected features (0 = --k-fraction)");
    auto* o_kf = run->add_option("--k-fraction", run_cfg.k_fraction, "Share of features kept");
    auto* o_bins = run->add_option("--bins", run_cfg.n_bins, "Discretization bins");
    auto* o_trees = run->add_option("--trees", run_cfg.n_trees, "Number of trees");
    auto* o_train = run->add_option("--train-fraction", run_cfg.train_fraction, "Training share");
    auto* o_grid = run->add_option("--grid", run_cfg.sweep_grid, "Sweep feature counts");
    auto* o_noloo = run->add_flag("--no-loo", "Skip leave-one-tool-out");
    auto* o_out = run->add_option("--out", run_cfg.output_dir, "Output directory");
    auto* o_hc = run->add_option("--hog-cols", run_cfg.hog.grid_cols, "HOG grid columns");
    auto* o_hr = run->add_option("--hog-rows", run_cfg.hog.grid_rows, "HOG grid rows");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto c = synth_corpus(derive_seed(synth_seed, stream::corpus), synth_subjects, synth_out);
            std::printf("%zu images, %zu tools -> %s\n", c.images.size(), c.manifest.tools().size(),
                        (fs::path(synth_out) / "manifest.csv").c_str());
        } else if (*ext) {
            const auto m = load_manifest(ext_manifest);
            auto images = load_manifest_images(m, ext_manifest);
            std::vector<std::size_t> rows(m.entries.size());
            std::iota(rows.begin(), rows.end(), std::size_t{0});
            if (ext_part != "all") {
                const auto split = subject_disjoint_split(m, ext_train_fraction, derive_seed(ext_seed, stream::split));
                rows = ext_part == "train" ? split.train : split.test;
            }
            std::vector<GrayImage> picked;
            std::vector<std::string> ids;
            for (auto r : rows) {
                picked.push_back(std::move(images[r]));
                ids.push_back(m.entries[r].path);
            }
            const auto store = extract_store(picked, ids, parse_extractor(ext_kind), ext_hog);
            save_store(store, ext_out);
            if (!ext_labels.empty()) save_labels(subset(m.labels(), rows), ext_labels);
            std::printf("%zu x %zu features -> %s\n", store.matrix.rows, store.matrix.cols, ext_out.c_str());
        } else if (*sel) {
            const auto store = load_store(sel_features);
            const auto y = load_labels(sel_labels);
            if (y.size() != store.matrix.rows) throw ArgumentError("labels and store rows differ in length");
            if (sel->count("--miq")) sel_params.mrmr_form = MrmrForm::miq;
            DetectorConfig d;
            d.method = parse_method(sel_method);
            d.k = sel_k;
            const auto r = select(d.method, store.matrix, y, d.resolve_k(store.matrix.cols), sel_params);
            save_selection(r, sel_out);
            std::printf("%s: %zu of %zu features -> %s\n", sel_method.c_str(), r.order.size(), r.candidate_count,
                        sel_out.c_str());
        } else if (*train) {
            const auto store = load_store(tr_features);
            const auto y = load_labels(tr_labels);
            if (y.size() != store.matrix.rows) throw ArgumentError("labels and store rows differ in length");
            FeatureMatrix x = store.matrix;
            if (!tr_selection.empty()) {
                const auto s = load_selection(tr_selection);
                x = x.select_columns(s.prefix(tr_k ? tr_k : s.order.size()));
            }
            const auto m = train_forest(x, y, tr_forest);
            save_forest(m, tr_out);
            std::printf("%zu trees on %zu features, OOB accuracy %.4f -> %s\n", m.n_trees(), m.n_features,
                        m.oob_accuracy, tr_out.c_str());
        } else if (*eval) {
            const auto store = load_store(ev_features);
            if (ev_protocol == "simple") {
                if (ev_model.empty() || ev_labels.empty()) throw ArgumentError("simple protocol needs --model and --labels");
                const auto m = load_forest(ev_model);
                const auto y = load_labels(ev_labels);
                if (y.size() != store.matrix.rows) throw ArgumentError("labels and store rows differ in length");
                Detector d;
                d.model = m;
                d.features = model_columns(m, ev_selection, store.matrix.cols);
                std::vector<std::size_t> bona, attack;
                for (std::size_t i = 0; i < y.size(); ++i) (y.labels[i] ? attack : bona).push_back(i);
                const auto s = score_rows(d, store.matrix, bona, attack);
                print_metrics("all", s);
                if (!ev_out.empty()) write_text(ev_out, det_csv(det_curve(s)));
            } else {
                if (ev_manifest.empty()) throw ArgumentError("loo protocol needs --manifest");
                const auto m = load_manifest(ev_manifest);
                if (store.matrix.rows != m.entries.size()) throw ArgumentError("store rows do not match the manifest");
                for (std::size_t i = 0; i < store.row_ids.size(); ++i)
                    if (store.row_ids[i] != m.entries[i].path)
                        throw ArgumentError("store row " + std::to_string(i) + " is not manifest entry '" +
                                            m.entries[i].path + "'");
                ev_cfg.method = parse_method(ev_method);
                ev_cfg.test_fraction = 1.0 - ev_cfg.train_fraction;
                ev_cfg.validate();
                const auto split = subject_disjoint_split(m, ev_cfg.train_fraction, ev_cfg.split_seed());
                const auto tables = run_loo_protocol(store.matrix, m, split, ev_cfg.detector(), ev_train_tools);
                const auto csv = protocol_csv(tables);
                std::cout << csv;
                std::printf("average D-EER %.2f%%\n", 100 * average_d_eer(tables));
                if (!ev_out.empty()) write_text(ev_out, csv);
            }
        } else if (*sweep) {
            const auto s = load_selection(sw_selection);
            const auto tr = load_store(sw_train_features), te = load_store(sw_test_features);
            const auto grid = sw_grid.empty() ? default_sweep_grid(s.order.size()) : sw_grid;
            const auto rows = sweep_feature_counts(s, grid, tr.matrix, load_labels(sw_train_labels), te.matrix,
                                                   load_labels(sw_test_labels), sw_forest);
            const auto csv = sweep_csv(rows);
            std::cout << csv;
            if (!sw_out.empty()) write_text(sw_out, csv);
        } else if (*viz) {
            const auto img = load_gray(vz_image);
            const auto kind = parse_extractor(vz_kind);
            const auto v = extract(img, kind, vz_hog);
            const auto s = load_selection(vz_selection);
            const auto chosen = s.prefix(vz_top ? std::min(vz_top, s.order.size()) : s.order.size());
            save_color(render_overlay(img, locate_features(*v.layout, chosen), chosen.size()), vz_out);
            if (!vz_glyphs.empty()) {
                if (kind != ExtractorKind::hog) throw ArgumentError("--glyphs needs --extractor hog");
                save_color(render_hog_glyphs(v), vz_glyphs);
            }
            std::printf("%zu features drawn -> %s\n", chosen.size(), vz_out.c_str());
        } else if (*run) {
            ExperimentConfig cfg;
            if (!run_config.empty()) {
                std::ifstream in(run_config);
                if (!in) throw IoError("cannot open config '" + run_config + "'");
                try {
                    merge_config(cfg, nlohmann::json::parse(in));
                } catch (const nlohmann::json::parse_error& e) {
                    throw FormatError(std::string("bad config: ") + e.what());
                }
            }
            cfg.seed = run_seed;
            if (o_kind->count()) cfg.extractor = parse_extractor(run_kind);
            if (o_method->count()) cfg.method = parse_method(run_method);
            if (o_k->count()) cfg.k = run_cfg.k;
            if (o_kf->count()) cfg.k_fraction = run_cfg.k_fraction;
            if (o_bins->count()) cfg.n_bins = run_cfg.n_bins;
            if (o_trees->count()) cfg.n_trees = run_cfg.n_trees;
            if (o_train->count()) {
                cfg.train_fraction = run_cfg.train_fraction;
                cfg.test_fraction = 1.0 - cfg.train_fraction;
            }
            if (o_grid->count()) cfg.sweep_grid = run_cfg.sweep_grid;
            if (o_noloo->count()) cfg.loo = false;
            if (o_out->count()) cfg.output_dir = run_cfg.output_dir;
            if (o_hc->count()) cfg.hog.grid_cols = run_cfg.hog.grid_cols;
            if (o_hr->count()) cfg.hog.grid_rows = run_cfg.hog.grid_rows;

            RunSummary r;
            if (run_synthetic > 0) {
                const auto c = generate_corpus(derive_seed(cfg.seed, stream::corpus), run_synthetic);
                r = run_pipeline(cfg, c.manifest, c.images);
            } else {
                if (run_manifest.empty()) throw ArgumentError("run needs --manifest or --synthetic");
                r = run_pipeline(cfg, run_manifest);
            }
            for (const auto& [tag, m] : r.metrics.items())
                if (m.is_object())
                    std::printf("%-10s D-EER %6.2f%%  BPCER10 %6.2f%%  BPCER20 %6.2f%%\n", tag.c_str(),
                                100 * m.at("d_eer").get<double>(), 100 * m.at("bpcer10").get<double>(),
                                100 * m.at("bpcer20").get<double>());
            if (r.metrics.contains("loo_average_d_eer"))
                std::printf("LOO average D-EER %.2f%%\n", 100 * r.metrics.at("loo_average_d_eer").get<double>());
            std::printf("digest %s\n", r.digest.c_str());
        }
    } catch (const StageError& e) {
        std::fprintf(stderr, "error in stage %s: %s\n", e.stage().c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
