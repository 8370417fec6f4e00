#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "madsel/error.hpp"
#include "madsel/infotheory.hpp"
#include "madsel/layout.hpp"
#include "madsel/parallel.hpp"
#include "madsel/rng.hpp"

namespace madsel {

enum class Method { mrmr, nmifs, cmim, cmim2, random, none };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::mrmr: return "mrmr";
        case Method::nmifs: return "nmifs";
        case Method::cmim: return "cmim";
        case Method::cmim2: return "cmim2";
        case Method::random: return "random";
        case Method::none: return "none";
    }
    return "?";
}

inline Method parse_method(std::string_view name) {
    for (auto m : {Method::mrmr, Method::nmifs, Method::cmim, Method::cmim2, Method::random, Method::none})
        if (to_string(m) == name) return m;
    throw ArgumentError("unknown selection method '" + std::string(name) + "'");
}

/// mRMR combination of relevance and redundancy: difference (MID) or quotient (MIQ).
enum class MrmrForm { mid, miq };

struct SelectionParams {
    std::uint32_t n_bins = 0;  ///< 0 = min(16, ceil(sqrt(samples)))
    MrmrForm mrmr_form = MrmrForm::mid;
    std::uint64_t seed = 0;    ///< random selector only
};

struct SelectionResult {
    Method method = Method::cmim2;
    std::vector<std::size_t> order;
    std::vector<double> scores;
    SelectionParams params;
    std::size_t candidate_count = 0;

    /// First k selected indices.
    std::vector<std::size_t> prefix(std::size_t k) const {
        if (k > order.size())
            throw ArgumentError("requested " + std::to_string(k) + " features but only " +
                                std::to_string(order.size()) + " were selected");
        return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)};
    }
};

/// Scores closer than this to the step maximum count as ties; ties go to the lowest index.
inline constexpr double kTieTolerance = 1e-12;
inline constexpr double kMiqEpsilon = 1e-12;

/// Discretized feature columns plus labels: the input of every criterion.
struct SelectionData {
    std::vector<DiscretizedColumn> columns;
    DiscretizedColumn labels;
    std::uint32_t n_bins = 0;
};

inline SelectionData prepare(const FeatureMatrix& x, const LabelColumn& y, std::uint32_t n_bins = 0) {
    if (x.rows != y.size()) throw ArgumentError("feature rows and labels differ in length");
    if (x.rows == 0) throw ArgumentError("no samples");
    SelectionData d;
    d.n_bins = n_bins == 0 ? default_bin_count(x.rows) : n_bins;
    d.columns.resize(x.cols);
    parallel_for(
        x.cols, [&](std::size_t c) { d.columns[c] = discretize(x.column(c), d.n_bins); }, 64);
    d.labels = y.column();
    return d;
}

namespace detail {

/// Lowest index whose score is within tolerance of the best admissible score.
inline std::size_t argmax_lowest(const std::vector<double>& scores, const std::vector<char>& taken) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!taken[i]) best = std::max(best, scores[i]);
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!taken[i] && scores[i] >= best - kTieTolerance) return i;
    throw ArgumentError("no candidate left to select");
}

/// Redundancy/conditional term between candidate i and a selected feature s.
inline double pair_term(Method m, const SelectionData& d, std::size_t i, std::size_t s) {
    switch (m) {
        case Method::mrmr: return mutual_information(d.columns[i], d.columns[s]);
        case Method::nmifs: return normalized_mi(d.columns[i], d.columns[s]);
        case Method::cmim:
        case Method::cmim2: return conditional_mi(d.columns[i], d.labels, d.columns[s]);
        default: throw ArgumentError("method has no pairwise term");
    }
}

inline double combine(Method m, const SelectionParams& p, double relevance, double sum, double min_term,
                      std::size_t n_selected) {
    const double mean = sum / static_cast<double>(n_selected);
    switch (m) {
        case Method::mrmr:
            return p.mrmr_form == MrmrForm::mid ? relevance - mean : relevance / (mean + kMiqEpsilon);
        case Method::nmifs: return relevance - mean;
        case Method::cmim: return min_term;
        case Method::cmim2: return mean;
        default: throw ArgumentError("method has no greedy score");
    }
}

}  // namespace detail

/// Greedy forward selection of k features. The first pick maximises MI(f; c);
/// each later pick maximises the method's relevance/redundancy trade-off against
/// the features selected so far:
///   mrmr   MI(c;f) - mean_s MI(f;s)          (or MI(c;f) / mean_s MI(f;s))
///   nmifs  MI(c;f) - mean_s MI_N(f;s)
///   cmim   min_s  MI(f;c | s)
///   cmim2  mean_s MI(f;c | s)
/// Pairwise terms are accumulated incrementally: each (candidate, selected)
/// pair is evaluated once, in the step its partner was selected.
inline SelectionResult select_greedy(Method method, const SelectionData& d, std::size_t k,
                                     const SelectionParams& params = {}) {
    const std::size_t n = d.columns.size();
    if (k < 1) throw ArgumentError("k must be >= 1");
    if (k > n) throw ArgumentError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " candidates");
    if (method != Method::mrmr && method != Method::nmifs && method != Method::cmim && method != Method::cmim2)
        throw ArgumentError("not a greedy criterion: " + std::string(to_string(method)));

    SelectionResult r;
    r.method = method;
    r.params = params;
    r.params.n_bins = d.n_bins;
    r.candidate_count = n;

    std::vector<double> relevance(n);
    parallel_for(n, [&](std::size_t i) { relevance[i] = mutual_information(d.columns[i], d.labels); }, 64);

    std::vector<double> sum(n, 0.0);
    std::vector<double> min_term(n, std::numeric_limits<double>::infinity());
    std::vector<double> score = relevance;
    std::vector<char> taken(n, 0);

    for (std::size_t step = 0; step < k; ++step) {
        const std::size_t pick = detail::argmax_lowest(score, taken);
        taken[pick] = 1;
        r.order.push_back(pick);
        r.scores.push_back(score[pick]);
        if (step + 1 == k) break;
        const std::size_t n_selected = step + 1;
        parallel_for(
            n,
            [&](std::size_t i) {
                if (taken[i]) return;
                const double t = detail::pair_term(method, d, i, pick);
                sum[i] += t;
                min_term[i] = std::min(min_term[i], t);
                score[i] = detail::combine(method, params, relevance[i], sum[i], min_term[i], n_selected);
            },
            64);
    }
    return r;
}

/// Scores every unselected candidate against a fixed selected set, recomputing
/// all pairwise terms from scratch. Selected candidates get NaN.
inline std::vector<double> score_candidates(Method method, const SelectionData& d,
                                            const std::vector<std::size_t>& selected,
                                            const SelectionParams& params = {}) {
    const std::size_t n = d.columns.size();
    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> taken(n, 0);
    for (auto s : selected) taken.at(s) = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double rel = mutual_information(d.columns[i], d.labels);
        if (selected.empty()) {
            out[i] = rel;
            continue;
        }
        double sum = 0.0, mn = std::numeric_limits<double>::infinity();
        for (auto s : selected) {
            const double t = detail::pair_term(method, d, i, s);
            sum += t;
            mn = std::min(mn, t);
        }
        out[i] = detail::combine(method, params, rel, sum, mn, selected.size());
    }
    return out;
}

/// k distinct indices drawn uniformly at random (baseline selector).
inline SelectionResult select_random(std::size_t n_features, std::size_t k, std::uint64_t seed) {
    if (k < 1 || k > n_features) throw ArgumentError("random selection size out of range");
    std::vector<std::size_t> idx(n_features);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx);
    SelectionResult r;
    r.method = Method::random;
    r.params.seed = seed;
    r.candidate_count = n_features;
    r.order.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    r.scores.assign(k, 0.0);
    return r;
}

/// Every feature in index order (selection disabled).
inline SelectionResult select_none(std::size_t n_features) {
    SelectionResult r;
    r.method = Method::none;
    r.candidate_count = n_features;
    r.order.resize(n_features);
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    r.scores.assign(n_features, 0.0);
    return r;
}

/// Dispatch on method. Greedy criteria discretize the matrix first.
inline SelectionResult select(Method method, const FeatureMatrix& x, const LabelColumn& y, std::size_t k,
                              const SelectionParams& params = {}) {
    switch (method) {
        case Method::random: return select_random(x.cols, k, params.seed);
        case Method::none: return select_none(x.cols);
        default: return select_greedy(method, prepare(x, y, params.n_bins), k, params);
    }
}

inline SelectionResult select_mrmr(const FeatureMatrix& x, const LabelColumn& y, std::size_t k,
                                   const SelectionParams& p = {}) {
    return select(Method::mrmr, x, y, k, p);
}
inline SelectionResult select_nmifs(const FeatureMatrix& x, const LabelColumn& y, std::size_t k,
                                    const SelectionParams& p = {}) {
    return select(Method::nmifs, x, y, k, p);
}
inline SelectionResult select_cmim(const FeatureMatrix& x, const LabelColumn& y, std::size_t k,
                                   const SelectionParams& p = {}) {
    return select(Method::cmim, x, y, k, p);
}
inline SelectionResult select_cmim2(const FeatureMatrix& x, const LabelColumn& y, std::size_t k,
                                    const SelectionParams& p = {}) {
    return select(Method::cmim2, x, y, k, p);
}

inline constexpr std::size_t kBruteForceMaxColumns = 12;

/// Exhaustive search for the k-subset whose joint variable carries the most
/// information about the labels. Subsets are visited in lexicographic order and
/// the first maximiser wins. Test-scale only.
inline std::vector<std::size_t> brute_force_best_subset(const std::vector<DiscretizedColumn>& columns,
                                                        const LabelColumn& y, std::size_t k) {
    const std::size_t n = columns.size();
    if (n > kBruteForceMaxColumns)
        throw ArgumentError("brute force limited to " + std::to_string(kBruteForceMaxColumns) + " columns");
    if (k < 1 || k > n) throw ArgumentError("subset size out of range");
    const auto labels = y.column();
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::vector<std::size_t> best;
    double best_mi = -1.0;
    std::vector<const DiscretizedColumn*> parts(k);
    while (true) {
        for (std::size_t j = 0; j < k; ++j) parts[j] = &columns[pick[j]];
        const double mi = mutual_information(joint_column(parts), labels);
        if (mi > best_mi + kTieTolerance) {
            best_mi = mi;
            best = pick;
        }
        // next combination
        std::size_t j = k;
        while (j > 0 && pick[j - 1] == n - k + (j - 1)) --j;
        if (j == 0) break;
        ++pick[j - 1];
        for (std::size_t t = j; t < k; ++t) pick[t] = pick[t - 1] + 1;
    }
    return best;
}

inline nlohmann::json to_json(const SelectionResult& r) {
    return {{"method", std::string(to_string(r.method))},
            {"params",
             {{"n_bins", r.params.n_bins},
              {"mrmr_form", r.params.mrmr_form == MrmrForm::mid ? "mid" : "miq"},
              {"seed", r.params.seed}}},
            {"candidate_count", r.candidate_count},
            {"order", r.order},
            {"scores", r.scores}};
}

inline SelectionResult selection_from_json(const nlohmann::json& j) {
    try {
        SelectionResult r;
        r.method = parse_method(j.at("method").get<std::string>());
        const auto& p = j.at("params");
        r.params.n_bins = p.at("n_bins").get<std::uint32_t>();
        r.params.mrmr_form = p.at("mrmr_form").get<std::string>() == "miq" ? MrmrForm::miq : MrmrForm::mid;
        r.params.seed = p.at("seed").get<std::uint64_t>();
        r.candidate_count = j.at("candidate_count").get<std::size_t>();
        r.order = j.at("order").get<std::vector<std::size_t>>();
        r.scores = j.at("scores").get<std::vector<double>>();
        if (r.order.size() != r.scores.size()) throw FormatError("selection order and scores differ in length");
        std::vector<char> seen(r.candidate_count, 0);
        for (auto i : r.order) {
            if (i >= r.candidate_count || seen[i]) throw FormatError("selection order invalid or duplicated");
            seen[i] = 1;
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad selection result: ") + e.what());
    }
}

}  // namespace madsel
