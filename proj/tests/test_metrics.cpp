#include <scd/metrics.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using scd::ConfusionCounts;
using scd::Tensor;

TEST(Binarize, BoundaryAndMonotonicity) {
    auto probs = Tensor<double>::from_data({1, 1, 4}, {0.1, 0.5, 0.500001, 0.9});
    auto mask = scd::binarize(probs, 0.5);
    EXPECT_EQ(mask, (std::vector<std::uint8_t>{0, 1, 1, 1}));  // >= convention
    EXPECT_THROW(scd::binarize(probs, 0.0), std::invalid_argument);
    EXPECT_THROW(scd::binarize(probs, 1.0), std::invalid_argument);

    auto gen = oracle::rng(81);
    auto map = oracle::random_tensor({1, 16, 16}, gen, false, 0.0, 1.0);
    std::size_t prev = map->numel() + 1;
    for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        auto m = scd::binarize(map, thr);
        const std::size_t pos = std::size_t(std::count(m.begin(), m.end(), 1));
        EXPECT_LE(pos, prev);
        prev = pos;
    }
}

TEST(Confusion, MatchesCountingOracle) {
    auto gen = oracle::rng(82);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<std::uint8_t> pred(256), gt(256);
    for (auto& v : pred) v = std::uint8_t(bit(gen));
    for (auto& v : gt) v = std::uint8_t(bit(gen));
    auto c = scd::confusion(pred, gt);
    ConfusionCounts ref;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && gt[i]) ref.tp++;
        if (pred[i] && !gt[i]) ref.fp++;
        if (!pred[i] && !gt[i]) ref.tn++;
        if (!pred[i] && gt[i]) ref.fn++;
    }
    EXPECT_EQ(c, ref);
    EXPECT_EQ(c.total(), 256u);
}

TEST(Confusion, PerfectAndInvertedPredictions) {
    std::vector<std::uint8_t> gt{1, 1, 1, 0, 0, 0, 0, 0};
    auto c = scd::confusion(gt, gt);
    EXPECT_EQ(c.tp, 3u);
    EXPECT_EQ(c.tn, 5u);
    EXPECT_EQ(c.fp + c.fn, 0u);

    std::vector<std::uint8_t> inv(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) inv[i] = !gt[i];
    auto ci = scd::confusion(inv, gt);
    EXPECT_EQ(ci.tp + ci.tn, 0u);
}

TEST(Confusion, RejectsNonBinary) {
    std::vector<std::uint8_t> bad{0, 2};
    std::vector<std::uint8_t> ok{0, 1};
    EXPECT_THROW(scd::confusion(bad, ok), std::invalid_argument);
    auto probs = Tensor<double>::from_data({1, 1, 2}, {0.7, 0.2});
    auto gt_soft = Tensor<double>::from_data({1, 1, 2}, {0.5, 0.0});
    EXPECT_THROW(scd::confusion(probs, gt_soft), std::invalid_argument);
}

TEST(Scores, HandComputedExample) {
    auto s = scd::scores({70, 30, 870, 30});
    EXPECT_DOUBLE_EQ(s.precision, 0.70);
    EXPECT_DOUBLE_EQ(s.recall, 0.70);
    EXPECT_DOUBLE_EQ(s.f1, 0.70);
    EXPECT_DOUBLE_EQ(s.accuracy, 0.94);
    EXPECT_TRUE(s.positives_defined);
}

TEST(Scores, PerfectAndDegenerate) {
    auto perfect = scd::scores({10, 0, 90, 0});
    EXPECT_DOUBLE_EQ(perfect.precision, 1.0);
    EXPECT_DOUBLE_EQ(perfect.recall, 1.0);
    EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
    EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);

    auto zero_tp = scd::scores({0, 5, 90, 5});
    EXPECT_DOUBLE_EQ(zero_tp.precision, 0.0);
    EXPECT_DOUBLE_EQ(zero_tp.recall, 0.0);
    EXPECT_DOUBLE_EQ(zero_tp.f1, 0.0);

    // All-negative gt and prediction: flagged, not silently 1.0.
    auto all_neg = scd::scores({0, 0, 100, 0});
    EXPECT_FALSE(all_neg.positives_defined);
    EXPECT_DOUBLE_EQ(all_neg.accuracy, 1.0);

    EXPECT_THROW(scd::scores({0, 0, 0, 0}), std::invalid_argument);
}

TEST(Scores, F1HarmonicBoundOnRandomCounts) {
    auto gen = oracle::rng(83);
    std::uniform_int_distribution<std::uint64_t> count(0, 1000);
    for (int trial = 0; trial < 1000; ++trial) {
        ConfusionCounts c{count(gen), count(gen), count(gen), count(gen)};
        if (c.total() == 0 || c.tp + c.fn + c.fp == 0) continue;
        auto s = scd::scores(c);
        if (s.precision > 0.0 && s.recall > 0.0) {
            EXPECT_GE(s.f1, std::min(s.precision, s.recall) - 1e-12);
            EXPECT_LE(s.f1, std::max(s.precision, s.recall) + 1e-12);
        }
    }
}

TEST(Scores, RelabelSymmetryAndStrictMonotonicity) {
    auto gen = oracle::rng(84);
    std::uniform_int_distribution<std::uint64_t> count(1, 500);
    for (int trial = 0; trial < 100; ++trial) {
        ConfusionCounts c{count(gen), count(gen), count(gen), count(gen)};
        auto s = scd::scores(c);
        auto flipped = scd::scores({c.tn, c.fn, c.tp, c.fp});  // tp<->tn, fp<->fn
        EXPECT_NEAR(s.accuracy, flipped.accuracy, 1e-15);

        // precision strictly falls as fp grows; recall as fn grows
        auto more_fp = scd::scores({c.tp, c.fp + 25, c.tn, c.fn});
        EXPECT_LT(more_fp.precision, s.precision);
        auto more_fn = scd::scores({c.tp, c.fp, c.tn, c.fn + 25});
        EXPECT_LT(more_fn.recall, s.recall);
    }
}

TEST(Confusion, TileCountsSumAssociatively) {
    auto gen = oracle::rng(85);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<std::uint8_t> pred(300), gt(300);
    for (auto& v : pred) v = std::uint8_t(bit(gen));
    for (auto& v : gt) v = std::uint8_t(bit(gen));

    auto whole = scd::confusion(pred, gt);
    ConfusionCounts sum;
    for (int tile = 0; tile < 3; ++tile) {
        std::vector<std::uint8_t> p(pred.begin() + tile * 100, pred.begin() + (tile + 1) * 100);
        std::vector<std::uint8_t> g(gt.begin() + tile * 100, gt.begin() + (tile + 1) * 100);
        sum += scd::confusion(p, g);
    }
    EXPECT_EQ(whole, sum);

    auto a = scd::confusion(pred, gt), b = scd::confusion(gt, pred), c = scd::confusion(gt, gt);
    EXPECT_EQ((a + b) + c, a + (b + c));
}
