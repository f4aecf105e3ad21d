// SPDX-License-Identifier: Apache-2.0
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gotok/random.hpp"
#include "metric_fixtures.hpp"

namespace gotok {
namespace {

TemporalSegment random_segment(Rng& rng) {
    std::uniform_int_distribution<int> u(0, 20);  // coarse grid so ties and touches occur
    const int a = u(rng), b = u(rng);
    return {static_cast<double>(std::min(a, b)), static_cast<double>(std::max(a, b))};
}

std::vector<TemporalSegment> random_events(Rng& rng, int max_n) {
    std::vector<TemporalSegment> out(rng() % static_cast<std::uint64_t>(max_n + 1));
    for (auto& s : out) s = random_segment(rng);
    return out;
}

TEST(SegmentIou, HandComputedFixture) {
    for (const auto& c : fixtures::iou_cases()) {
        EXPECT_NEAR(segment_iou(c.a, c.b), c.iou, 1e-15) << c.a.start << "," << c.a.end << " vs " << c.b.start;
        EXPECT_NEAR(segment_iou(c.b, c.a), c.iou, 1e-15);
    }
}

TEST(SegmentIou, DistinctZeroLengthSegmentsScoreZero) {
    EXPECT_EQ(segment_iou({3, 3}, {5, 5}), 0.0);
    EXPECT_EQ(segment_iou({3, 3}, {3, 5}), 0.0);
}

TEST(SegmentIou, RejectsInvalid) {
    EXPECT_THROW(segment_iou({5, 4}, {0, 1}), ValidationError);
    EXPECT_THROW(segment_iou({-1, 4}, {0, 1}), ValidationError);
    EXPECT_THROW(segment_iou({0, std::nan("")}, {0, 1}), ValidationError);
}

TEST(SegmentIou, PropertySymmetricBoundedAndOneOnlyWhenIdentical) {
    Rng rng(41);
    for (int trial = 0; trial < 5000; ++trial) {
        const auto a = random_segment(rng), b = random_segment(rng);
        const double v = segment_iou(a, b);
        ASSERT_EQ(v, segment_iou(b, a));
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        if (v == 1.0) {
            ASSERT_EQ(a, b);
        }
    }
}

TEST(Miou, MeanOfPairs) {
    const std::vector<SegmentPair> two{{{2, 8}, {4, 10}}, {{1, 2}, {1, 2}}};
    EXPECT_DOUBLE_EQ(miou(two), 0.75);
    const std::vector<SegmentPair> one{{{2, 8}, {4, 10}}};
    EXPECT_DOUBLE_EQ(miou(one), 0.5);
    EXPECT_EQ(miou({}), 0.0);
}

TEST(Miou, Fixture229MatchesSummationOracle) {
    const auto pairs = fixtures::pairs_229();
    ASSERT_EQ(pairs.size(), 229u);
    EXPECT_NEAR(miou(pairs), fixtures::pairs_229_oracle_mean(), 1e-12);
}

TEST(PAt, ThresholdIsInclusive) {
    // IoUs 0.5, 0.4, 1.0
    const std::vector<SegmentPair> p{{{2, 8}, {4, 10}}, {{0, 4}, {0, 10}}, {{3, 5}, {3, 5}}};
    EXPECT_NEAR(segment_iou({0, 4}, {0, 10}), 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(p_at(p, 0.5), 2.0 / 3.0);
    const std::vector<SegmentPair> zero{{{0, 1}, {2, 3}}, {{4, 5}, {6, 7}}};
    EXPECT_EQ(p_at(zero, 0.5), 0.0);
}

TEST(PAt, PropertyNonincreasingInTauAndPermutationInvariant) {
    Rng rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SegmentPair> pairs(1 + rng() % 12);
        for (auto& [a, b] : pairs) a = random_segment(rng), b = random_segment(rng);
        double prev = 1.0;
        for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
            const double v = p_at(pairs, tau);
            ASSERT_LE(v, prev);
            prev = v;
        }
        auto shuffled = pairs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        ASSERT_EQ(p_at(shuffled, 0.5), p_at(pairs, 0.5));
        ASSERT_NEAR(miou(shuffled), miou(pairs), 1e-15);
    }
}

TEST(DenseCaptionF1, HandComputedFixturesMatchExhaustiveOracle) {
    for (const auto& c : fixtures::f1_cases()) {
        EXPECT_NEAR(dense_caption_f1(c.pred, c.gt), c.f1, 1e-12) << c.name;
        EXPECT_NEAR(fixtures::exhaustive_f1(c.pred, c.gt), c.f1, 1e-12) << c.name;
    }
}

// Greedy descending-IoU matching is the fixed protocol. It is not a maximum
// matching: here the best pair (0.9) blocks the only pairing that matches both.
TEST(DenseCaptionF1, GreedyProtocolCanFallBelowMaximumMatching) {
    const std::vector<TemporalSegment> pred{{0, 10}, {0, 4}};
    const std::vector<TemporalSegment> gt{{0, 9}, {5, 10}};
    EXPECT_EQ(greedy_match_count(pred, gt, 0.3), 1u);
    EXPECT_EQ(fixtures::exhaustive_match_count(pred, gt, 0.3), 2u);
}

TEST(DenseCaptionF1, PropertyGreedyNeverExceedsOracleAndIdenticalScoresOne) {
    Rng rng(43);
    int agree = 0;
    const int trials = 3000;
    for (int trial = 0; trial < trials; ++trial) {
        const auto pred = random_events(rng, 5), gt = random_events(rng, 5);
        const double greedy = dense_caption_f1(pred, gt);
        const double oracle = fixtures::exhaustive_f1(pred, gt);
        ASSERT_LE(greedy, oracle + 1e-12);
        ASSERT_GE(greedy, 0.0);
        agree += std::abs(greedy - oracle) <= 1e-12;
        auto copy = gt;
        std::shuffle(copy.begin(), copy.end(), rng);
        ASSERT_EQ(dense_caption_f1(copy, gt), 1.0);
    }
    // Disagreement needs a contested pair like the one above; it stays rare.
    EXPECT_GT(agree, trials * 9 / 10);
}

TEST(F1FromCounts, Edges) {
    EXPECT_EQ(f1_from_counts(0, 0, 0), 1.0);
    EXPECT_EQ(f1_from_counts(0, 3, 0), 0.0);
    EXPECT_EQ(f1_from_counts(0, 3, 4), 0.0);
    EXPECT_DOUBLE_EQ(f1_from_counts(2, 4, 2), 2.0 / 3.0);
}

std::vector<SegmentRecord> records(const std::string& text) {
    std::istringstream in(text);
    return parse_segment_records(in);
}

TEST(Evaluate, LocalizationCountsMissingAsZero) {
    const auto gt = records(R"({"id":"a","segments":[[2,8]]})"
                            "\n"
                            R"({"id":"b","segments":[[0,1]]})");
    const auto pred = records(R"({"id":"a","segments":[[4,10]]})");
    const auto r = evaluate_localization(pred, gt);
    EXPECT_EQ(r.n_items, 2u);
    EXPECT_DOUBLE_EQ(r.miou, 0.25);
    EXPECT_DOUBLE_EQ(r.p_at_05, 0.5);
    EXPECT_FALSE(r.protocol.empty());
}

TEST(Evaluate, DenseCaptioningAveragesOverGroundTruthIds) {
    const auto gt = records(R"({"id":"a","segments":[[0,10],[20,30]],"captions":["x","y"]})"
                            "\n"
                            R"({"id":"b","segments":[[0,10]]})");
    const auto pred = records(R"({"id":"a","segments":[[0,10],[20,30]]})");
    const auto r = evaluate_dense_captioning(pred, gt);
    EXPECT_EQ(r.n_items, 2u);
    EXPECT_DOUBLE_EQ(r.f1, 0.5);
}

TEST(Evaluate, ParseErrorsNameTheField) {
    auto field_error = [](const std::string& text) {
        try {
            records(text);
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(field_error(R"({"segments":[]})").find("'id'"), std::string::npos);
    EXPECT_NE(field_error(R"({"id":"a","segments":[[3,1]]})").find("'segments'"), std::string::npos);
    EXPECT_NE(field_error(R"({"id":"a","segments":[],"captions":[1]})").find("'captions'"), std::string::npos);
    EXPECT_NE(field_error("nope").find("line 1"), std::string::npos);
    EXPECT_THROW(evaluate_localization(records("{\"id\":\"a\",\"segments\":[]}\n{\"id\":\"a\",\"segments\":[]}"), {}),
                 ValidationError);
}

}  // namespace
}  // namespace gotok
