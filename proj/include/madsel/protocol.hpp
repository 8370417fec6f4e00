#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "madsel/error.hpp"
#include "madsel/forest.hpp"
#include "madsel/layout.hpp"
#include "madsel/manifest.hpp"
#include "madsel/metrics.hpp"
#include "madsel/rng.hpp"
#include "madsel/selection.hpp"

namespace madsel {

/// Selection + classifier settings shared by the protocol runners.
struct DetectorConfig {
    Method method = Method::cmim2;
    std::size_t k = 0;               ///< 0 = use k_fraction
    double k_fraction = 0.1;         ///< share of candidate features kept when k == 0
    SelectionParams selection;
    ForestParams forest;

    std::size_t resolve_k(std::size_t n_features) const {
        if (method == Method::none) return n_features;
        const std::size_t want =
            k > 0 ? k : static_cast<std::size_t>(std::lround(k_fraction * static_cast<double>(n_features)));
        return std::clamp<std::size_t>(want, 1, n_features);
    }
};

struct Detector {
    SelectionResult selection;
    std::vector<std::size_t> features;  ///< columns fed to the forest
    ForestModel model;
};

/// Select features on the given training rows only, then fit the forest on them.
inline Detector fit_detector(const FeatureMatrix& x, const LabelColumn& y, const std::vector<std::size_t>& rows,
                             const DetectorConfig& cfg) {
    const FeatureMatrix train = x.select_rows(rows);
    std::vector<std::uint8_t> labels;
    labels.reserve(rows.size());
    for (auto r : rows) labels.push_back(y.labels.at(r));
    const LabelColumn train_y(std::move(labels));
    Detector d;
    const std::size_t k = cfg.resolve_k(x.cols);
    d.selection = select(cfg.method, train, train_y, k, cfg.selection);
    d.features = d.selection.prefix(k);
    d.model = train_forest(train.select_columns(d.features), train_y, cfg.forest);
    return d;
}

inline ScoreSet score_rows(const Detector& d, const FeatureMatrix& x, const std::vector<std::size_t>& bonafide_rows,
                           const std::vector<std::size_t>& attack_rows) {
    ScoreSet s;
    const auto bx = x.select_rows(bonafide_rows).select_columns(d.features);
    const auto ax = x.select_rows(attack_rows).select_columns(d.features);
    s.bonafide = predict_scores(d.model, bx);
    s.attack = predict_scores(d.model, ax);
    return s;
}

/// Rows of a partition filtered by class and tool ("" selects bona fide).
inline std::vector<std::size_t> rows_of(const DatasetManifest& m, const std::vector<std::size_t>& part,
                                        const std::string& tool) {
    std::vector<std::size_t> out;
    for (auto i : part) {
        const auto& e = m.entries.at(i);
        if (tool.empty() ? e.label == Label::bonafide : (e.label == Label::morph && e.tool == tool)) out.push_back(i);
    }
    return out;
}

struct ProtocolRow {
    std::string test_tool;
    double d_eer = 0.0;
};

/// Leave-one-tool-out result for one training tool.
struct ProtocolTable {
    std::string train_tool;
    std::vector<ProtocolRow> rows;  ///< never contains train_tool
    double average() const {
        if (rows.empty()) return 0.0;
        double s = 0.0;
        for (const auto& r : rows) s += r.d_eer;
        return s / static_cast<double>(rows.size());
    }
};

/// Train on the training partition's bona fides plus one tool's morphs, then
/// report D-EER on the test partition's bona fides against every other tool's
/// morphs. Repeated for each train tool (or only the listed ones).
inline std::vector<ProtocolTable> run_loo_protocol(const FeatureMatrix& x, const DatasetManifest& m, const Split& split,
                                                   const DetectorConfig& cfg,
                                                   std::vector<std::string> train_tools = {}) {
    if (x.rows != m.entries.size()) throw ArgumentError("feature rows do not match the manifest");
    check_subject_disjoint(m, split);
    const auto tools = m.tools();
    if (tools.size() < 2) throw ProtocolError("leave-one-tool-out needs at least two morphing tools");
    if (train_tools.empty()) train_tools = tools;
    const auto y = m.labels();
    const auto test_bona = rows_of(m, split.test, "");
    if (test_bona.empty()) throw ProtocolError("test partition has no bona fide images");

    std::vector<ProtocolTable> out;
    for (const auto& train_tool : train_tools) {
        if (std::find(tools.begin(), tools.end(), train_tool) == tools.end())
            throw ArgumentError("unknown train tool '" + train_tool + "'");
        auto train_rows = rows_of(m, split.train, "");
        const auto morphs = rows_of(m, split.train, train_tool);
        train_rows.insert(train_rows.end(), morphs.begin(), morphs.end());
        std::sort(train_rows.begin(), train_rows.end());
        const auto det = fit_detector(x, y, train_rows, cfg);
        ProtocolTable table{train_tool, {}};
        for (const auto& test_tool : tools) {
            if (test_tool == train_tool) continue;
            const auto attack = rows_of(m, split.test, test_tool);
            if (attack.empty()) throw ProtocolError("test partition has no morphs from '" + test_tool + "'");
            table.rows.push_back({test_tool, d_eer(score_rows(det, x, test_bona, attack))});
        }
        out.push_back(std::move(table));
    }
    return out;
}

/// Mean of all rows of all tables.
inline double average_d_eer(const std::vector<ProtocolTable>& tables) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& t : tables)
        for (const auto& r : t.rows) {
            s += r.d_eer;
            ++n;
        }
    return n ? s / static_cast<double>(n) : 0.0;
}

/// 100, 200, ... up to min(1000, total); a single row of `total` when total < 100.
inline std::vector<std::size_t> default_sweep_grid(std::size_t total) {
    std::vector<std::size_t> g;
    for (std::size_t k = 100; k <= std::min<std::size_t>(1000, total); k += 100) g.push_back(k);
    if (g.empty() && total > 0) g.push_back(total);
    return g;
}

struct SweepRow {
    std::size_t k = 0;
    double d_eer = 0.0;
    double accuracy = 0.0;  ///< at score threshold 0.5
    double bpcer10 = 0.0;
    double bpcer20 = 0.0;
};

/// Retrain the forest on the first k selected features for each k in the grid
/// and score a held-out set.
inline std::vector<SweepRow> sweep_feature_counts(const SelectionResult& sel, const std::vector<std::size_t>& grid,
                                                  const FeatureMatrix& train_x, const LabelColumn& train_y,
                                                  const FeatureMatrix& test_x, const LabelColumn& test_y,
                                                  const ForestParams& forest) {
    if (test_x.rows != test_y.size()) throw ArgumentError("test rows and labels differ in length");
    std::vector<std::size_t> bona, attack;
    for (std::size_t i = 0; i < test_y.size(); ++i) (test_y.labels[i] ? attack : bona).push_back(i);
    std::vector<SweepRow> out;
    for (auto k : grid) {
        const auto cols = sel.prefix(k);
        Detector d;
        d.selection = sel;
        d.features = cols;
        d.model = train_forest(train_x.select_columns(cols), train_y, forest);
        const auto s = score_rows(d, test_x, bona, attack);
        std::size_t correct = 0;
        for (double v : s.bonafide) correct += v < 0.5;
        for (double v : s.attack) correct += v >= 0.5;
        out.push_back({k, d_eer(s), static_cast<double>(correct) / static_cast<double>(test_y.size()), bpcer10(s),
                       bpcer20(s)});
    }
    return out;
}

}  // namespace madsel
