#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "madsel/error.hpp"
#include "madsel/infotheory.hpp"
#include "madsel/layout.hpp"
#include "madsel/parallel.hpp"
#include "madsel/rng.hpp"

namespace madsel {

/// Decision-tree node. Leaves have feature == -1. Samples with
/// x[feature] <= threshold go left.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t bonafide = 0;  ///< training samples of class 0 reaching the node
    std::uint32_t morph = 0;     ///< training samples of class 1 reaching the node

    bool is_leaf() const { return feature < 0; }
    /// Majority vote; an exact tie votes bona fide.
    bool votes_morph() const { return morph > bonafide; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    bool vote(std::span<const float> x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(static_cast<double>(x[static_cast<std::size_t>(nodes[i].feature)]) <=
                                                 nodes[i].threshold
                                             ? nodes[i].left
                                             : nodes[i].right);
        return nodes[i].votes_morph();
    }
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestParams {
    std::size_t n_trees = 300;
    std::uint64_t seed = 0;
    std::size_t feature_subsample = 0;  ///< 0 = ceil(sqrt(d))
};

struct ForestModel {
    std::size_t n_features = 0;
    std::uint64_t seed = 0;
    std::size_t feature_subsample = 0;
    double oob_accuracy = std::numeric_limits<double>::quiet_NaN();
    std::vector<DecisionTree> trees;

    std::size_t n_trees() const { return trees.size(); }
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& x, const std::vector<std::uint8_t>& y, std::size_t mtry, Rng& rng)
        : x_(x), y_(y), mtry_(mtry), rng_(rng), features_(x.cols) {
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    DecisionTree build(std::vector<std::size_t> samples) {
        DecisionTree tree;
        struct Pending {
            std::size_t node;
            std::vector<std::size_t> samples;
        };
        std::vector<Pending> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, std::move(samples)});
        while (!stack.empty()) {
            Pending job = std::move(stack.back());
            stack.pop_back();
            TreeNode node;
            for (auto s : job.samples) (y_[s] ? node.morph : node.bonafide)++;
            Split split;
            if (node.morph > 0 && node.bonafide > 0) split = best_split(job.samples);
            if (split.feature >= 0) {
                node.feature = static_cast<std::int32_t>(split.feature);
                node.threshold = split.threshold;
                std::vector<std::size_t> left, right;
                for (auto s : job.samples)
                    (static_cast<double>(x_(s, split.feature)) <= split.threshold ? left : right).push_back(s);
                node.left = static_cast<std::int32_t>(tree.nodes.size());
                node.right = node.left + 1;
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                stack.push_back({static_cast<std::size_t>(node.right), std::move(right)});
                stack.push_back({static_cast<std::size_t>(node.left), std::move(left)});
            }
            tree.nodes[job.node] = node;
        }
        return tree;
    }

private:
    struct Split {
        std::int64_t feature = -1;
        double threshold = 0.0;
        double purity = -1.0;
    };

    // Visits features in random order until mtry non-constant ones have been
    // evaluated. Minimising weighted Gini impurity is equivalent to maximising
    // sum_k nL_k^2 / nL + sum_k nR_k^2 / nR.
    Split best_split(const std::vector<std::size_t>& samples) {
        Split best;
        std::size_t examined = 0;
        const std::size_t m = samples.size();
        std::size_t total1 = 0;
        for (auto s : samples) total1 += y_[s];
        const std::size_t total0 = m - total1;
        std::vector<std::pair<float, std::uint8_t>> vals(m);
        for (std::size_t f = 0; f < features_.size() && examined < mtry_; ++f) {
            const std::size_t j = f + rng_.below(features_.size() - f);
            std::swap(features_[f], features_[j]);
            const std::size_t feat = features_[f];
            for (std::size_t i = 0; i < m; ++i) vals[i] = {x_(samples[i], feat), y_[samples[i]]};
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (vals.front().first == vals.back().first) continue;
            ++examined;
            std::size_t l0 = 0, l1 = 0;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                (vals[i].second ? l1 : l0)++;
                if (vals[i].first == vals[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1), nr = static_cast<double>(m - i - 1);
                const double r0 = static_cast<double>(total0 - l0), r1 = static_cast<double>(total1 - l1);
                const double purity = (double(l0) * l0 + double(l1) * l1) / nl + (r0 * r0 + r1 * r1) / nr;
                if (purity > best.purity) {
                    best.purity = purity;
                    best.feature = static_cast<std::int64_t>(feat);
                    const double a = vals[i].first, b = vals[i + 1].first;
                    double t = a + (b - a) / 2.0;
                    if (!(t < b)) t = a;
                    best.threshold = t;
                }
            }
        }
        return best;
    }

    const FeatureMatrix& x_;
    const std::vector<std::uint8_t>& y_;
    std::size_t mtry_;
    Rng& rng_;
    std::vector<std::size_t> features_;
};

}  // namespace detail

/// Random forest of fully grown Gini trees. Tree t draws its bootstrap sample and
/// split candidates from its own stream derive_seed(seed, t), so training is
/// deterministic for a seed and independent of thread scheduling.
inline ForestModel train_forest(const FeatureMatrix& x, const LabelColumn& y, const ForestParams& params = {}) {
    if (x.rows != y.size()) throw ArgumentError("feature rows and labels differ in length");
    if (x.rows < 2) throw TrainingError("need at least 2 training samples");
    if (x.cols < 1) throw TrainingError("need at least 1 feature");
    if (params.n_trees < 1) throw ArgumentError("forest needs at least one tree");
    const auto n1 = static_cast<std::size_t>(std::count(y.labels.begin(), y.labels.end(), 1));
    if (n1 == 0 || n1 == y.size()) throw TrainingError("training data contains a single class");
    for (float v : x.data)
        if (!std::isfinite(v)) throw TrainingError("non-finite feature value");

    ForestModel model;
    model.n_features = x.cols;
    model.seed = params.seed;
    model.feature_subsample =
        params.feature_subsample == 0
            ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols))))
            : std::min(params.feature_subsample, x.cols);
    model.trees.resize(params.n_trees);

    const std::size_t n = x.rows;
    std::vector<std::vector<char>> in_bag(params.n_trees);
    parallel_for(params.n_trees, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, t));
        std::vector<std::size_t> sample(n);
        in_bag[t].assign(n, 0);
        for (auto& s : sample) {
            s = rng.below(n);
            in_bag[t][s] = 1;
        }
        detail::TreeBuilder builder(x, y.labels, model.feature_subsample, rng);
        model.trees[t] = builder.build(std::move(sample));
    });

    std::size_t correct = 0, counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t votes = 0, trees = 0;
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            if (in_bag[t][i]) continue;
            ++trees;
            votes += model.trees[t].vote(std::span<const float>(x.row(i), x.cols));
        }
        if (trees == 0) continue;
        ++counted;
        const bool predicted_morph = 2 * votes > trees;
        correct += predicted_morph == (y.labels[i] == 1);
    }
    if (counted > 0) model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(counted);
    return model;
}

/// Fraction of trees voting morph; higher = more morph-like.
inline double predict_score(const ForestModel& model, std::span<const float> row) {
    if (row.size() != model.n_features)
        throw ArgumentError("row has " + std::to_string(row.size()) + " features, model expects " +
                            std::to_string(model.n_features));
    if (model.trees.empty()) throw ArgumentError("empty forest");
    std::size_t votes = 0;
    for (const auto& t : model.trees) votes += t.vote(row);
    return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

inline std::vector<double> predict_scores(const ForestModel& model, const FeatureMatrix& x) {
    std::vector<double> out(x.rows);
    parallel_for(x.rows, [&](std::size_t i) { out[i] = predict_score(model, {x.row(i), x.cols}); });
    return out;
}

// Versioned little-endian binary dump.

inline constexpr char kForestMagic[8] = {'M', 'A', 'D', 'S', 'E', 'L', 'R', 'F'};
inline constexpr std::uint32_t kForestFormatVersion = 1;

namespace detail {

struct ByteWriter {
    std::vector<std::uint8_t> out;
    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::uint8_t buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        out.insert(out.end(), buf, buf + sizeof(T));
    }
};

struct ByteReader {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;
    template <class T>
    T get() {
        if (in.size() - pos < sizeof(T)) throw FormatError("truncated forest model");
        std::uint8_t buf[sizeof(T)];
        std::memcpy(buf, in.data() + pos, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        pos += sizeof(T);
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const ForestModel& m) {
    detail::ByteWriter w;
    for (char c : kForestMagic) w.put(c);
    w.put(kForestFormatVersion);
    w.put(static_cast<std::uint64_t>(m.n_features));
    w.put(m.seed);
    w.put(static_cast<std::uint64_t>(m.feature_subsample));
    w.put(m.oob_accuracy);
    w.put(static_cast<std::uint64_t>(m.trees.size()));
    for (const auto& t : m.trees) {
        w.put(static_cast<std::uint64_t>(t.nodes.size()));
        for (const auto& n : t.nodes) {
            w.put(n.feature);
            w.put(n.threshold);
            w.put(n.left);
            w.put(n.right);
            w.put(n.bonafide);
            w.put(n.morph);
        }
    }
    return std::move(w.out);
}

inline ForestModel deserialize_forest(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r{bytes};
    for (char c : kForestMagic)
        if (r.get<char>() != c) throw FormatError("not a forest model file");
    if (const auto v = r.get<std::uint32_t>(); v != kForestFormatVersion)
        throw FormatError("unsupported forest format version " + std::to_string(v));
    ForestModel m;
    m.n_features = r.get<std::uint64_t>();
    m.seed = r.get<std::uint64_t>();
    m.feature_subsample = r.get<std::uint64_t>();
    m.oob_accuracy = r.get<double>();
    const auto n_trees = r.get<std::uint64_t>();
    if (n_trees > bytes.size()) throw FormatError("corrupt tree count");
    m.trees.resize(n_trees);
    for (auto& t : m.trees) {
        const auto n_nodes = r.get<std::uint64_t>();
        if (n_nodes == 0 || n_nodes > bytes.size()) throw FormatError("corrupt node count");
        t.nodes.resize(n_nodes);
        for (auto& n : t.nodes) {
            n.feature = r.get<std::int32_t>();
            n.threshold = r.get<double>();
            n.left = r.get<std::int32_t>();
            n.right = r.get<std::int32_t>();
            n.bonafide = r.get<std::uint32_t>();
            n.morph = r.get<std::uint32_t>();
        }
        // Children always follow their parent, which rules out cycles.
        for (std::uint64_t i = 0; i < n_nodes; ++i) {
            const auto& n = t.nodes[i];
            if (n.is_leaf()) continue;
            if (static_cast<std::uint64_t>(n.feature) >= m.n_features || n.left <= 0 || n.right <= 0 ||
                static_cast<std::uint64_t>(n.left) <= i || static_cast<std::uint64_t>(n.right) <= i ||
                static_cast<std::uint64_t>(n.left) >= n_nodes || static_cast<std::uint64_t>(n.right) >= n_nodes)
                throw FormatError("corrupt tree node");
        }
    }
    if (r.pos != bytes.size()) throw FormatError("trailing bytes after forest model");
    return m;
}

}  // namespace madsel
