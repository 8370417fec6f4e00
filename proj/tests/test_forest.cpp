#include <gtest/gtest.h>

#include "madsel/madsel.hpp"

using namespace madsel;

namespace {

struct Data {
    FeatureMatrix x;
    LabelColumn y;
};

Data xor_clusters(std::size_t per_cluster, std::uint64_t seed) {
    Rng rng(seed);
    Data d{FeatureMatrix(4 * per_cluster, 2), {}};
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < 4 * per_cluster; ++i) {
        const int a = static_cast<int>(i % 2), b = static_cast<int>((i / 2) % 2);
        d.x(i, 0) = static_cast<float>(a * 4.0 + rng.normal() * 0.5);
        d.x(i, 1) = static_cast<float>(b * 4.0 + rng.normal() * 0.5);
        y.push_back(static_cast<std::uint8_t>(a ^ b));
    }
    d.y = LabelColumn(y);
    return d;
}

Data noisy(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Data d{FeatureMatrix(rows, cols), {}};
    std::vector<std::uint8_t> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = static_cast<std::uint8_t>(rng.below(2));
        for (std::size_t c = 0; c < cols; ++c) d.x(r, c) = static_cast<float>(rng.normal() + (c < 3 ? y[r] : 0));
    }
    d.y = LabelColumn(y);
    return d;
}

DecisionTree stump(bool morph) {
    DecisionTree t;
    TreeNode leaf;
    (morph ? leaf.morph : leaf.bonafide) = 1;
    t.nodes.push_back(leaf);
    return t;
}

}  // namespace

TEST(Forest, SeparableOneDimensional) {
    FeatureMatrix x(40, 1);
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < 40; ++i) {
        x(i, 0) = i < 20 ? -1.0f - static_cast<float>(i) : 1.0f + static_cast<float>(i);
        y.push_back(i < 20 ? 0 : 1);
    }
    const auto m = train_forest(x, LabelColumn(y), {50, 3});
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(predict_score(m, {x.row(i), 1}), y[i] ? 1.0 : 0.0);
}

TEST(Forest, Deterministic) {
    const auto d = noisy(60, 8, 1);
    const auto a = train_forest(d.x, d.y, {40, 99}), b = train_forest(d.x, d.y, {40, 99});
    EXPECT_EQ(serialize(a), serialize(b));
    const auto probe = noisy(30, 8, 2);
    EXPECT_EQ(predict_scores(a, probe.x), predict_scores(b, probe.x));
    const auto c = train_forest(d.x, d.y, {40, 100});
    EXPECT_NE(serialize(a), serialize(c));
}

TEST(Forest, XorOutOfBag) {
    const auto d = xor_clusters(50, 3);
    const auto m = train_forest(d.x, d.y, {300, 4});
    EXPECT_GT(m.oob_accuracy, 0.95);
    EXPECT_EQ(m.n_trees(), 300u);
    EXPECT_EQ(m.feature_subsample, 2u);
}

TEST(Forest, ScoreIsVoteFraction) {
    ForestModel m;
    m.n_features = 1;
    m.trees.assign(300, stump(true));
    const float row[] = {0.0f};
    EXPECT_EQ(predict_score(m, row), 1.0);
    m.trees.assign(300, stump(false));
    EXPECT_EQ(predict_score(m, row), 0.0);
    for (std::size_t i = 0; i < 150; ++i) m.trees[i] = stump(true);
    EXPECT_EQ(predict_score(m, row), 0.5);
}

TEST(Forest, ScoresInUnitInterval) {
    const auto d = noisy(50, 5, 5);
    const auto m = train_forest(d.x, d.y, {25, 6});
    for (double s : predict_scores(m, noisy(100, 5, 7).x)) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
    for (const auto& t : m.trees)
        for (const auto& n : t.nodes)
            if (!n.is_leaf()) {
                EXPECT_LT(static_cast<std::size_t>(n.feature), 5u);
                EXPECT_GT(n.left, 0);
            }
}

TEST(Forest, Errors) {
    const auto d = noisy(20, 3, 8);
    const float short_row[] = {0.0f, 1.0f};
    const auto m = train_forest(d.x, d.y, {5, 1});
    EXPECT_THROW(predict_score(m, short_row), ArgumentError);
    EXPECT_THROW(train_forest(d.x, LabelColumn(std::vector<std::uint8_t>(20, 1))), TrainingError);
    EXPECT_THROW(train_forest(FeatureMatrix(1, 3), LabelColumn({1})), TrainingError);
    auto bad = d.x;
    bad(3, 1) = NAN;
    EXPECT_THROW(train_forest(bad, d.y), TrainingError);
    EXPECT_THROW(train_forest(d.x, d.y, {0, 1}), ArgumentError);
}

TEST(Forest, MonotoneTransformKeepsPartition) {
    const auto d = noisy(60, 4, 9);
    auto mapped = d.x;
    for (auto& v : mapped.data) v = static_cast<float>(std::exp(0.5 * v) * 3.0 - 1.0);
    const auto a = train_forest(d.x, d.y, {30, 10}), b = train_forest(mapped, d.y, {30, 10});
    // same splits on the same bootstrap samples; only the threshold values move
    ASSERT_EQ(a.trees.size(), b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
        for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
            auto na = a.trees[t].nodes[i], nb = b.trees[t].nodes[i];
            na.threshold = nb.threshold = 0.0;
            ASSERT_EQ(na, nb);
        }
    }
}

TEST(ForestSerialization, RoundTripBitExact) {
    const auto d = noisy(40, 6, 11);
    const auto m = train_forest(d.x, d.y, {20, 12});
    const auto bytes = serialize(m);
    const auto back = deserialize_forest(bytes);
    EXPECT_EQ(serialize(back), bytes);
    EXPECT_EQ(back.trees, m.trees);
    EXPECT_EQ(predict_scores(back, d.x), predict_scores(m, d.x));
}

TEST(ForestSerialization, RejectsCorruption) {
    const auto d = noisy(40, 6, 13);
    auto bytes = serialize(train_forest(d.x, d.y, {3, 14}));
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(deserialize_forest(truncated), FormatError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_forest(trailing), FormatError);
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(deserialize_forest(magic), FormatError);
    auto version = bytes;
    version[8] = 9;
    EXPECT_THROW(deserialize_forest(version), FormatError);
}

TEST(ForestSerialization, RejectsCyclicTree) {
    ForestModel m;
    m.n_features = 1;
    DecisionTree t;
    TreeNode root;
    root.feature = 0;
    root.left = 0;
    root.right = 1;
    t.nodes = {root, TreeNode{}};
    m.trees.push_back(t);
    EXPECT_THROW(deserialize_forest(serialize(m)), FormatError);
}
