// SPDX-License-Identifier: Apache-2.0
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gotok/detection_pipeline.hpp"

namespace gotok {
namespace {

Detection det(const std::string& vid, int slot, double score, const std::string& label = "cat",
              BBox box = {0.1, 0.1, 0.5, 0.5}) {
    Detection d;
    d.video_id = vid;
    d.frame_slot = slot;
    d.image_w = 640;
    d.image_h = 480;
    d.label = label;
    d.score = score;
    d.set_bbox(box);
    return d;
}

std::vector<Detection> random_detections(Rng& rng, int videos, int max_per_video) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<std::string> labels{"cat", "dog", "man", "car"};
    std::vector<Detection> out;
    for (int v = 0; v < videos; ++v) {
        const int n = static_cast<int>(rng() % static_cast<std::uint64_t>(max_per_video + 1));
        for (int i = 0; i < n; ++i) {
            const double a = u(rng), b = u(rng), c = u(rng), e = u(rng);
            Detection d = det("v" + std::to_string(v), static_cast<int>(rng() % 12), u(rng), labels[rng() % 4],
                              {std::min(a, b), std::min(c, e), std::max(a, b), std::max(c, e)});
            d.id = out.size();
            out.push_back(d);
        }
    }
    return out;
}

TEST(SampleFrames, MidpointIndices) {
    EXPECT_EQ(sample_frames(80, 8), (std::vector<int>{5, 15, 25, 35, 45, 55, 65, 75}));
    EXPECT_EQ(sample_frames(3, 8), (std::vector<int>{0, 0, 0, 1, 1, 2, 2, 2}));
    EXPECT_EQ(sample_frames(1, 1), (std::vector<int>{0}));
    EXPECT_THROW(sample_frames(0, 8), ValidationError);
    EXPECT_THROW(sample_frames(10, 0), ValidationError);
}

TEST(SampleFrames, PropertyInRangeAndNondecreasing) {
    for (int total = 1; total <= 60; ++total)
        for (int f = 1; f <= 20; ++f) {
            const auto idx = sample_frames(total, f);
            ASSERT_EQ(idx.size(), static_cast<std::size_t>(f));
            for (std::size_t i = 0; i < idx.size(); ++i) {
                ASSERT_GE(idx[i], 0);
                ASSERT_LT(idx[i], total);
                if (i > 0) {
                    ASSERT_LE(idx[i - 1], idx[i]);
                }
                ASSERT_EQ(idx[i], static_cast<int>(std::floor((i + 0.5) * total / f)));
            }
        }
}

TEST(FilterTopk, ThresholdThenRank) {
    std::vector<Detection> d{det("v", 0, 0.4), det("v", 0, 0.9), det("v", 0, 0.3), det("v", 0, 0.6)};
    const auto kept = filter_topk(d, {8, 5, 0.5});
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].score, 0.9);
    EXPECT_EQ(kept[1].score, 0.6);
    EXPECT_EQ(filter_topk(d, {8, 1, 0.0}).size(), 1u);
    EXPECT_EQ(filter_topk(d, {8, 5, 0.6}).size(), 2u);  // score == delta is kept
}

TEST(FilterTopk, TiesBreakByLabelThenBox) {
    std::vector<Detection> d{det("v", 0, 0.7, "zebra"), det("v", 0, 0.7, "ant", {0.2, 0.2, 0.3, 0.3}),
                             det("v", 0, 0.7, "ant", {0.1, 0.1, 0.3, 0.3})};
    const auto kept = filter_topk(d, {8, 2, 0.5});
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].label, "ant");
    EXPECT_EQ(kept[0].bbox.x1, 0.1);
    EXPECT_EQ(kept[1].label, "ant");
}

TEST(SelectDetections, PropertyBoundedByFramesTimesK) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const auto all = random_detections(rng, 3, 80);
        const SamplingConfig cfg{8, 5, 0.3};
        const auto kept = select_detections(all, cfg);
        std::map<std::string, std::map<int, int>> per;
        for (const auto& d : kept) {
            ASSERT_LT(d.frame_slot, 8);
            ASSERT_GE(d.score, 0.3);
            ++per[d.video_id][d.frame_slot];
        }
        for (const auto& [vid, slots] : per) {
            int total = 0;
            for (auto [slot, n] : slots) {
                ASSERT_LE(n, 5);
                total += n;
            }
            ASSERT_LE(total, 40) << vid;
        }
    }
}

TEST(SelectDetections, GroupsByVideoThenSlot) {
    std::vector<Detection> d{det("b", 2, 0.9), det("a", 1, 0.8), det("b", 0, 0.7), det("a", 0, 0.95)};
    const auto kept = select_detections(d, {8, 5, 0.5});
    ASSERT_EQ(kept.size(), 4u);
    EXPECT_EQ(kept[0].video_id, "b");
    EXPECT_EQ(kept[0].frame_slot, 0);
    EXPECT_EQ(kept[1].frame_slot, 2);
    EXPECT_EQ(kept[2].video_id, "a");
    EXPECT_EQ(kept[2].frame_slot, 0);
}

TEST(FlipClasses, ExactCountAndNeverSameLabel) {
    const Vocabulary vocab({"cat", "dog", "man", "car"});
    std::vector<Detection> d;
    for (int i = 0; i < 20; ++i) d.push_back(det("v", i % 8, 0.9, vocab[static_cast<std::size_t>(i % 4)]));
    const auto f = flip_classes(d, 0.5, vocab, 7);
    int changed = 0;
    for (std::size_t i = 0; i < d.size(); ++i) changed += f[i].label != d[i].label;
    EXPECT_EQ(changed, 10);
    EXPECT_EQ(flip_classes(d, 0.0, vocab, 7), d);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NE(flip_classes(d, 1.0, vocab, 7)[i].label, d[i].label);
}

TEST(FlipClasses, SeedChangesChoiceButNotCount) {
    const Vocabulary vocab({"cat", "dog"});
    std::vector<Detection> d(10, det("v", 0, 0.9, "cat"));
    for (std::uint64_t seed : {1u, 2u}) {
        const auto f = flip_classes(d, 0.1, vocab, seed);
        EXPECT_EQ(std::count_if(f.begin(), f.end(), [](const Detection& x) { return x.label == "dog"; }), 1);
    }
    EXPECT_EQ(flip_classes(d, 0.3, vocab, 5), flip_classes(d, 0.3, vocab, 5));
}

TEST(FlipClasses, PerVideoStreamsAreIndependent) {
    const Vocabulary vocab({"a", "b", "c"});
    std::vector<Detection> one(6, det("x", 0, 0.9, "a"));
    std::vector<Detection> two = one;
    for (int i = 0; i < 6; ++i) two.push_back(det("y", 0, 0.9, "b"));
    const auto f1 = flip_classes(one, 0.5, vocab, 3);
    const auto f2 = flip_classes(two, 0.5, vocab, 3);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(f1[i].label, f2[i].label);
}

TEST(FlipClasses, RejectsBadArguments) {
    EXPECT_THROW(flip_classes({}, 1.5, Vocabulary({"a", "b"}), 0), ValidationError);
    EXPECT_THROW(flip_classes({}, 0.5, Vocabulary({"a"}), 0), ValidationError);
    EXPECT_THROW(Vocabulary({"a", "a"}), ValidationError);
}

TEST(FlipCount, RoundsHalfUp) {
    EXPECT_EQ(flip_count(0.1, 10), 1u);
    EXPECT_EQ(flip_count(0.25, 10), 3u);
    EXPECT_EQ(flip_count(0.5, 1), 1u);
    EXPECT_EQ(flip_count(0.2, 0), 0u);
}

TEST(ShiftAll, MovesByFractionUnlessClamped) {
    std::vector<Detection> d;
    for (int i = 0; i < 100; ++i) d.push_back(det("v" + std::to_string(i % 7), 0, 0.9, "cat", {0.3, 0.3, 0.6, 0.7}));
    const auto s = shift_all(d, 0.02, 11);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double dx = s[i].bbox.x1 - d[i].bbox.x1, dy = s[i].bbox.y1 - d[i].bbox.y1;
        EXPECT_NEAR(std::hypot(dx, dy), 0.02 * std::sqrt(2.0), 1e-12);
        EXPECT_NEAR(s[i].bbox.x2 - s[i].bbox.x1, 0.3, 1e-12);
        EXPECT_NEAR(s[i].bbox_px[0], s[i].bbox.x1 * 640, 1e-9);
    }
    EXPECT_EQ(shift_all(d, 0.0, 11), d);
    EXPECT_EQ(shift_all(d, 0.02, 11), s);
    EXPECT_THROW(shift_all(d, -0.1, 1), ValidationError);
}

TEST(Grounded, SortedBySlotThenScore) {
    std::vector<Detection> d{det("v", 1, 0.9), det("v", 0, 0.5), det("v", 0, 0.8)};
    for (std::size_t i = 0; i < d.size(); ++i) d[i].id = i;
    const auto g = to_grounded_objects(d);
    EXPECT_EQ(g[0].source.detection_id, 2u);
    EXPECT_EQ(g[1].source.detection_id, 1u);
    EXPECT_EQ(g[2].source.detection_id, 0u);
}

std::string parse_error_field(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_detections(in);
    } catch (const DetectionParseError& e) {
        return e.field() + "@" + std::to_string(e.line());
    }
    return "";
}

constexpr const char* kGood =
    R"({"video_id":"v1","frame_slot":2,"timestamp_s":1.5,"bbox_px":[10,20,110,220],"image_wh":[640,480],"label":"dog","score":0.8})";

TEST(ParseDetections, ReadsAndNormalizes) {
    std::istringstream in(std::string(kGood) + "\n\n" + kGood + "\n");
    const auto d = parse_detections(in);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[1].id, 1u);
    EXPECT_EQ(d[0].frame_slot, 2);
    EXPECT_NEAR(d[0].bbox.x2, 110.0 / 640.0, 1e-15);
    EXPECT_NEAR(d[0].bbox.y2, 220.0 / 480.0, 1e-15);
}

TEST(ParseDetections, ErrorsNameLineAndField) {
    auto with = [](const std::string& from, const std::string& to) {
        std::string s = kGood;
        s.replace(s.find(from), from.size(), to);
        return s;
    };
    EXPECT_EQ(parse_error_field(with("0.8", "1.5")), "score@1");
    EXPECT_EQ(parse_error_field(std::string(kGood) + "\n" + with("\"label\":\"dog\",", "")), "label@2");
    EXPECT_EQ(parse_error_field(with("110", "700")), "bbox_px@1");
    EXPECT_EQ(parse_error_field(with("[640,480]", "[640]")), "image_wh@1");
    EXPECT_EQ(parse_error_field(with("2,", "-1,")), "frame_slot@1");
    EXPECT_EQ(parse_error_field("{not json"), "<record>@1");
    EXPECT_EQ(parse_error_field("[1,2]"), "<record>@1");
}

TEST(ParseDetections, PropertyWriteParseRoundTrip) {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const auto d = random_detections(rng, 2, 20);
        std::ostringstream out;
        write_detections(d, out);
        std::istringstream in(out.str());
        const auto back = parse_detections(in);
        ASSERT_EQ(back.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_EQ(back[i].label, d[i].label);
            EXPECT_EQ(back[i].score, d[i].score);
            EXPECT_NEAR(back[i].bbox.x1, d[i].bbox.x1, 1e-12);
            EXPECT_NEAR(back[i].bbox.y2, d[i].bbox.y2, 1e-12);
        }
        std::ostringstream again;
        write_detections(back, again);
        EXPECT_EQ(again.str(), out.str());
    }
}

}  // namespace
}  // namespace gotok
