// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic time-sensitive QA videos. Every category has a fixed prototype
// feature vector; a frame's feature map is Gaussian background noise plus the
// prototype of each object written into the patches its box covers. Each
// video asks "when does <c> appear ?" for a category present in one
// contiguous run of frame slots, answered by the first and last slot tokens.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gotok/detection_pipeline.hpp"
#include "gotok/feature_store.hpp"
#include "gotok/geometry.hpp"
#include "gotok/random.hpp"
#include "gotok/toy/vocab.hpp"

namespace gotok::toy {

struct SyntheticConfig {
    int n_videos = 100;
    int frames = 8;                 ///< F
    int n_p = 14;
    int d_v = 64;
    int n_categories = 8;
    double objects_per_frame_mean = 2.4;
    int max_objects_per_frame = 5;  ///< k; counts are truncated to [0, k]
    double noise_sigma = 0.1;
    int total_frames = 80;          ///< raw frames per video before sampling
    double fps = 1.0;
    double image_w = 640.0;
    double image_h = 480.0;
    double min_box_side = 0.08;
    double max_box_side = 0.35;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_videos < 0) throw ValidationError("n_videos must be >= 0");
        if (frames < 1 || n_p < 1 || d_v < 1) throw ValidationError("frames, n_p and d_v must be positive");
        if (n_categories < 2) throw ValidationError("synthetic data needs at least 2 categories");
        if (objects_per_frame_mean < 0.0) throw ValidationError("objects_per_frame_mean must be >= 0");
        if (max_objects_per_frame < 1) throw ValidationError("max_objects_per_frame must be >= 1");
        if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
        if (total_frames < 1 || !(fps > 0.0)) throw ValidationError("total_frames and fps must be positive");
        if (!(0.0 < min_box_side && min_box_side <= max_box_side && max_box_side <= 1.0))
            throw ValidationError("box side range must satisfy 0 < min <= max <= 1");
    }
};

/// One planted object of a frame.
struct PlantedObject {
    int category = 0;
    BBox bbox;
};

/// Input of the synthetic visual encoder: what is in a frame and the seed
/// of its background noise.
struct SyntheticFrame {
    std::string video_id;
    int frame_slot = 0;
    std::vector<PlantedObject> objects;
    std::uint64_t noise_seed = 0;
};

/// Frozen stand-in for the visual encoder; holds the category prototypes
/// (stored at float precision) and nothing trainable.
class SyntheticEncoder {
public:
    SyntheticEncoder(int n_p, int d_v, int n_categories, double noise_sigma, std::uint64_t seed)
        : n_p_(n_p), d_v_(d_v), sigma_(noise_sigma) {
        Rng rng = stream_for(seed, "prototypes");
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int c = 0; c < n_categories; ++c) {
            std::vector<double> v(static_cast<std::size_t>(d_v));
            double norm = 0.0;
            for (auto& x : v) {
                x = normal(rng);
                norm += x * x;
            }
            norm = std::sqrt(norm);
            std::vector<float> proto(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) proto[i] = static_cast<float>(v[i] / norm);
            prototypes_.push_back(std::move(proto));
        }
    }

    int n_p() const noexcept { return n_p_; }
    int d_v() const noexcept { return d_v_; }
    int n_categories() const noexcept { return static_cast<int>(prototypes_.size()); }
    const std::vector<float>& prototype(int c) const { return prototypes_.at(static_cast<std::size_t>(c)); }

    FrameFeatureMap encode(const SyntheticFrame& frame) const {
        FrameFeatureMap map(frame.video_id, static_cast<std::uint32_t>(frame.frame_slot), n_p_, d_v_);
        std::vector<double> acc(map.values().size(), 0.0);
        if (sigma_ > 0.0) {
            Rng rng(mix_seed(frame.noise_seed));
            std::normal_distribution<double> noise(0.0, sigma_);
            for (auto& x : acc) x = noise(rng);
        }
        const PatchGrid grid(n_p_);
        for (const auto& obj : frame.objects) {
            const auto& proto = prototype(obj.category);
            for (auto [r, c] : covered_patches(obj.bbox, grid)) {
                double* cell = acc.data() + (static_cast<std::size_t>(r) * n_p_ + c) * d_v_;
                for (int ch = 0; ch < d_v_; ++ch) cell[ch] += proto[static_cast<std::size_t>(ch)];
            }
        }
        auto out = map.values();
        for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
        return map;
    }

private:
    int n_p_;
    int d_v_;
    double sigma_;
    std::vector<std::vector<float>> prototypes_;
};

static_assert(VisualEncoder<SyntheticEncoder, SyntheticFrame>);

/// A question about one category of a video and its answer tokens.
struct QaPair {
    int category = 0;
    int first_slot = 0;
    int last_slot = 0;
    std::vector<int> question_ids;  ///< <bos> when does <c> appear ?
    std::vector<int> answer_ids;    ///< first and last slot token
};

inline QaPair make_question(const ToyVocab& vocab, int category, int first_slot, int last_slot) {
    return {category,
            first_slot,
            last_slot,
            {vocab.bos(), vocab.when(), vocab.does(), vocab.category(category), vocab.appear(), vocab.question_mark()},
            {vocab.slot(first_slot), vocab.slot(last_slot)}};
}

struct SyntheticSample {
    std::string video_id;
    std::vector<FrameFeatureMap> frames;  ///< one per slot, in slot order
    std::vector<Detection> detections;    ///< ground-truth objects, score 1
    QaPair qa;                            ///< the video's question: its target category and range
    std::vector<int> categories_used;     ///< distinct categories planted
};

/// Truncated Poisson draw of an object count.
inline int draw_object_count(Rng& rng, double mean, int max_count) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<int> poisson(mean);
    return std::min(poisson(rng), max_count);
}

class SyntheticDataset {
public:
    explicit SyntheticDataset(const SyntheticConfig& cfg)
        : cfg_(cfg),
          encoder_((cfg.validate(), cfg.n_p), cfg.d_v, cfg.n_categories, cfg.noise_sigma, cfg.seed),
          labels_(category_names(cfg.n_categories)),
          vocab_(labels_, cfg.frames) {}

    const SyntheticConfig& config() const noexcept { return cfg_; }
    const SyntheticEncoder& encoder() const noexcept { return encoder_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const ToyVocab& vocab() const noexcept { return vocab_; }

    /// Video `index` of the dataset; depends only on (seed, index).
    SyntheticSample make_sample(int index, const std::string& split = "v") const {
        const std::string vid = split + std::to_string(index);
        Rng rng = stream_for(cfg_.seed, "video:" + vid);
        const int F = cfg_.frames;

        SyntheticSample s;
        s.video_id = vid;
        std::uniform_int_distribution<int> cat_dist(0, cfg_.n_categories - 1);
        const int target = cat_dist(rng);
        std::uniform_int_distribution<int> slot_dist(0, F - 1);
        const int a = slot_dist(rng), b = slot_dist(rng);
        const int first = std::min(a, b), last = std::max(a, b);

        const auto raw_frames = sample_frames(cfg_.total_frames, F);
        std::uniform_real_distribution<double> side(cfg_.min_box_side, cfg_.max_box_side);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> other_dist(0, cfg_.n_categories - 2);

        std::vector<bool> used(static_cast<std::size_t>(cfg_.n_categories), false);
        for (int slot = 0; slot < F; ++slot) {
            SyntheticFrame frame{vid, slot, {}, rng()};
            const bool in_range = slot >= first && slot <= last;
            int count = draw_object_count(rng, cfg_.objects_per_frame_mean, cfg_.max_objects_per_frame);
            if (in_range) count = std::max(count, 1);
            for (int j = 0; j < count; ++j) {
                int cat = 0;
                if (in_range && j == 0) {
                    cat = target;
                } else {
                    cat = other_dist(rng);
                    if (cat >= target) ++cat;
                }
                const double w = side(rng), h = side(rng);
                const double x1 = unit(rng) * (1.0 - w), y1 = unit(rng) * (1.0 - h);
                frame.objects.push_back({cat, BBox{x1, y1, x1 + w, y1 + h}});
                used[static_cast<std::size_t>(cat)] = true;
            }
            s.frames.push_back(encoder_.encode(frame));

            const double timestamp = raw_frames[static_cast<std::size_t>(slot)] / cfg_.fps;
            for (const auto& obj : frame.objects) {
                Detection d;
                d.video_id = vid;
                d.frame_slot = slot;
                d.timestamp_s = timestamp;
                d.image_w = cfg_.image_w;
                d.image_h = cfg_.image_h;
                d.set_bbox(obj.bbox);
                d.label = labels_[static_cast<std::size_t>(obj.category)];
                d.score = 1.0;
                d.id = s.detections.size();
                s.detections.push_back(std::move(d));
            }
        }
        for (int c = 0; c < cfg_.n_categories; ++c)
            if (used[static_cast<std::size_t>(c)]) s.categories_used.push_back(c);

        s.qa = make_question(vocab_, target, first, last);
        return s;
    }

    std::vector<SyntheticSample> generate(int count, const std::string& split = "v", int offset = 0) const {
        std::vector<SyntheticSample> out;
        out.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) out.push_back(make_sample(offset + i, split));
        return out;
    }

private:
    SyntheticConfig cfg_;
    SyntheticEncoder encoder_;
    std::vector<std::string> labels_;
    ToyVocab vocab_;
};

/// The sample's own question plus one question per other planted category,
/// answered by the first and last slot that category occupies (its slots
/// need not be contiguous). At most `max_questions` are kept, always
/// including the sample's own; which extras are kept and the order of the
/// result are seeded per video.
inline std::vector<QaPair> question_set(const SyntheticSample& s, const ToyVocab& vocab,
                                        const std::vector<std::string>& labels, int max_questions,
                                        std::uint64_t seed) {
    if (max_questions < 1) throw ValidationError("max_questions must be >= 1");
    std::vector<QaPair> out{s.qa};
    std::vector<int> others;
    for (int c : s.categories_used)
        if (c != s.qa.category) others.push_back(c);
    Rng rng = stream_for(seed, "questions:" + s.video_id);
    std::shuffle(others.begin(), others.end(), rng);
    if (others.size() + 1 > static_cast<std::size_t>(max_questions)) others.resize(static_cast<std::size_t>(max_questions - 1));
    std::sort(others.begin(), others.end());
    for (int c : others) {
        int lo = -1, hi = -1;
        for (const auto& d : s.detections)
            if (d.label == labels[static_cast<std::size_t>(c)]) {
                lo = lo < 0 ? d.frame_slot : std::min(lo, d.frame_slot);
                hi = std::max(hi, d.frame_slot);
            }
        out.push_back(make_question(vocab, c, lo, hi));
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

/// The dataset's `n_videos` samples.
inline std::vector<SyntheticSample> generate_synthetic_dataset(const SyntheticConfig& cfg) {
    SyntheticDataset ds(cfg);
    return ds.generate(cfg.n_videos);
}

}  // namespace gotok::toy
