// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gotok/error.hpp"
#include "gotok/geometry.hpp"
#include "gotok/go_tokenizer.hpp"
#include "gotok/random.hpp"

namespace gotok {

/// One grounded object reported by a detector (or taken from annotations).
struct Detection {
    std::string video_id;
    int frame_slot = 0;
    double timestamp_s = 0.0;
    std::array<double, 4> bbox_px{};  ///< ordered x1, y1, x2, y2 in pixels
    double image_w = 1.0;
    double image_h = 1.0;
    BBox bbox;  ///< bbox_px normalized by the image size
    std::string label;
    double score = 1.0;
    std::size_t id = 0;  ///< position in the source stream

    /// Replaces the normalized box and recomputes the pixel box from it.
    void set_bbox(const BBox& b) {
        bbox = b;
        bbox_px = {b.x1 * image_w, b.y1 * image_h, b.x2 * image_w, b.y2 * image_h};
    }

    bool operator==(const Detection&) const = default;
};

struct SamplingConfig {
    int frames = 8;       ///< F
    int topk = 5;         ///< k
    double delta = 0.5;   ///< confidence threshold

    void validate() const {
        if (frames < 1) throw ValidationError("frames (F) must be >= 1");
        if (topk < 1) throw ValidationError("topk (k) must be >= 1");
        if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
    }
};

/// Ordered list of distinct category labels.
class Vocabulary {
public:
    explicit Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw ValidationError("vocabulary must not be empty");
        std::set<std::string> seen;
        for (const auto& l : labels_)
            if (!seen.insert(l).second) throw ValidationError("duplicate vocabulary label '" + l + "'");
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& operator[](std::size_t i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    std::ptrdiff_t index_of(const std::string& label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        return it == labels_.end() ? -1 : it - labels_.begin();
    }

private:
    std::vector<std::string> labels_;
};

/// Midpoint sampling: index_i = floor((i + 0.5) * total / F), in [0, total).
inline std::vector<int> sample_frames(int total_frames, int frames) {
    if (total_frames < 1) throw ValidationError("total_frames must be >= 1");
    if (frames < 1) throw ValidationError("frames (F) must be >= 1");
    std::vector<int> idx(static_cast<std::size_t>(frames));
    for (int i = 0; i < frames; ++i) {
        const auto v = ((2 * static_cast<std::int64_t>(i) + 1) * total_frames) / (2 * static_cast<std::int64_t>(frames));
        idx[static_cast<std::size_t>(i)] = static_cast<int>(std::min<std::int64_t>(v, total_frames - 1));
    }
    return idx;
}

/// Score descending, then label, then bbox lexicographic.
inline bool detection_rank(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.label != b.label) return a.label < b.label;
    return a.bbox < b.bbox;
}

/// Drops scores below delta and keeps the k best of one frame.
inline std::vector<Detection> filter_topk(std::vector<Detection> frame_detections, const SamplingConfig& cfg) {
    cfg.validate();
    std::erase_if(frame_detections, [&](const Detection& d) { return d.score < cfg.delta; });
    std::stable_sort(frame_detections.begin(), frame_detections.end(), detection_rank);
    if (frame_detections.size() > static_cast<std::size_t>(cfg.topk)) frame_detections.resize(static_cast<std::size_t>(cfg.topk));
    return frame_detections;
}

/// Applies filter_topk per (video, frame slot), dropping slots >= F. Output
/// is grouped by video (first appearance order), then slot, then rank, so a
/// video keeps at most F * k detections.
inline std::vector<Detection> select_detections(const std::vector<Detection>& all, const SamplingConfig& cfg) {
    cfg.validate();
    std::vector<std::string> order;
    std::map<std::string, std::map<int, std::vector<Detection>>> grouped;
    for (const auto& d : all) {
        if (d.frame_slot < 0 || d.frame_slot >= cfg.frames) continue;
        if (!grouped.contains(d.video_id)) order.push_back(d.video_id);
        grouped[d.video_id][d.frame_slot].push_back(d);
    }
    std::vector<Detection> kept;
    for (const auto& vid : order)
        for (auto& [slot, dets] : grouped[vid])
            for (auto& d : filter_topk(std::move(dets), cfg)) kept.push_back(std::move(d));
    return kept;
}

/// Round-half-up of ratio * n.
inline std::size_t flip_count(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

/// Per video, relabels round(ratio * n) uniformly chosen detections with a
/// uniformly drawn vocabulary label different from the original. The random
/// stream of each video depends only on (seed, video_id).
inline std::vector<Detection> flip_classes(std::vector<Detection> dets, double ratio, const Vocabulary& vocab,
                                           std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("flip ratio must lie in [0, 1]");
    if (vocab.size() < 2) throw ValidationError("flip_classes needs a vocabulary of at least 2 labels");

    std::map<std::string, std::vector<std::size_t>> by_video;
    for (std::size_t i = 0; i < dets.size(); ++i) by_video[dets[i].video_id].push_back(i);

    for (auto& [vid, members] : by_video) {
        Rng rng = stream_for(seed, "flip:" + vid);
        const std::size_t m = flip_count(ratio, members.size());
        std::vector<std::size_t> chosen = members;
        std::shuffle(chosen.begin(), chosen.end(), rng);
        chosen.resize(m);
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t i : chosen) {
            Detection& d = dets[i];
            const auto own = vocab.index_of(d.label);
            if (own < 0) {
                std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
                d.label = vocab[pick(rng)];
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 2);
                std::size_t j = pick(rng);
                if (j >= static_cast<std::size_t>(own)) ++j;
                d.label = vocab[j];
            }
        }
    }
    return dets;
}

/// Shifts every box by `fraction` of W and H with independent random signs
/// per axis (see shift_bbox).
inline std::vector<Detection> shift_all(std::vector<Detection> dets, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0)) throw ValidationError("shift fraction must be >= 0");
    std::map<std::string, Rng> streams;
    std::bernoulli_distribution coin(0.5);
    for (auto& d : dets) {
        auto it = streams.find(d.video_id);
        if (it == streams.end()) it = streams.emplace(d.video_id, stream_for(seed, "shift:" + d.video_id)).first;
        ShiftDirection dir;
        dir.sign_x = coin(it->second) ? 1 : -1;
        dir.sign_y = coin(it->second) ? 1 : -1;
        if (fraction > 0.0) d.set_bbox(shift_bbox(d.bbox, fraction, dir));
    }
    return dets;
}

/// Token-ready view of detections of one video.
inline std::vector<GroundedObject> to_grounded_objects(const std::vector<Detection>& dets) {
    std::vector<GroundedObject> out;
    out.reserve(dets.size());
    for (const auto& d : dets) out.push_back({d.frame_slot, d.bbox, {d.id, d.score}});
    sort_objects(out);
    return out;
}

// ---------------------------------------------------------------------------
// JSON Lines: {"video_id", "frame_slot", "timestamp_s", "bbox_px", "image_wh",
//              "label", "score"}
// ---------------------------------------------------------------------------

class DetectionParseError : public ValidationError {
public:
    DetectionParseError(std::size_t line, std::string field, const std::string& msg)
        : ValidationError("line " + std::to_string(line) + ": field '" + field + "': " + msg),
          line_(line),
          field_(std::move(field)) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

inline Detection parse_detection(const nlohmann::json& j, std::size_t line, std::size_t id) {
    auto require = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw DetectionParseError(line, key, "missing");
        return j.at(key);
    };
    auto number = [&](const nlohmann::json& v, const char* key) {
        if (!v.is_number()) throw DetectionParseError(line, key, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw DetectionParseError(line, key, "not finite");
        return x;
    };

    Detection d;
    d.id = id;
    const auto& vid = require("video_id");
    if (!vid.is_string()) throw DetectionParseError(line, "video_id", "expected a string");
    d.video_id = vid.get<std::string>();

    const auto& slot = require("frame_slot");
    if (!slot.is_number_integer() || slot.get<std::int64_t>() < 0 || slot.get<std::int64_t>() > INT32_MAX)
        throw DetectionParseError(line, "frame_slot", "expected a non-negative integer");
    d.frame_slot = slot.get<int>();

    d.timestamp_s = number(require("timestamp_s"), "timestamp_s");
    if (d.timestamp_s < 0.0) throw DetectionParseError(line, "timestamp_s", "negative");

    const auto& wh = require("image_wh");
    if (!wh.is_array() || wh.size() != 2) throw DetectionParseError(line, "image_wh", "expected [W, H]");
    d.image_w = number(wh[0], "image_wh");
    d.image_h = number(wh[1], "image_wh");
    if (d.image_w <= 0.0 || d.image_h <= 0.0) throw DetectionParseError(line, "image_wh", "dimensions must be > 0");

    const auto& bb = require("bbox_px");
    if (!bb.is_array() || bb.size() != 4) throw DetectionParseError(line, "bbox_px", "expected [x1, y1, x2, y2]");
    std::array<double, 4> px{};
    for (std::size_t i = 0; i < 4; ++i) px[i] = number(bb[i], "bbox_px");
    try {
        d.bbox = normalize_bbox(px, d.image_w, d.image_h);
    } catch (const ValidationError& e) {
        throw DetectionParseError(line, "bbox_px", e.what());
    }
    d.bbox_px = {std::min(px[0], px[2]), std::min(px[1], px[3]), std::max(px[0], px[2]), std::max(px[1], px[3])};

    const auto& label = require("label");
    if (!label.is_string() || label.get<std::string>().empty())
        throw DetectionParseError(line, "label", "expected a non-empty string");
    d.label = label.get<std::string>();

    d.score = number(require("score"), "score");
    if (d.score < 0.0 || d.score > 1.0)
        throw DetectionParseError(line, "score", "value " + std::to_string(d.score) + " outside [0, 1]");
    return d;
}

/// Blank lines are skipped; ids are assigned in stream order.
inline std::vector<Detection> parse_detections(std::istream& in) {
    std::vector<Detection> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw DetectionParseError(line, "<record>", std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) throw DetectionParseError(line, "<record>", "expected a JSON object");
        out.push_back(parse_detection(j, line, out.size()));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Detection& d) {
    nlohmann::ordered_json j;
    j["video_id"] = d.video_id;
    j["frame_slot"] = d.frame_slot;
    j["timestamp_s"] = d.timestamp_s;
    j["bbox_px"] = d.bbox_px;
    j["image_wh"] = {d.image_w, d.image_h};
    j["label"] = d.label;
    j["score"] = d.score;
    return j;
}

inline void write_detections(const std::vector<Detection>& dets, std::ostream& out) {
    for (const auto& d : dets) out << to_json(d).dump() << '\n';
    if (!out) throw IoError("failed to write detections");
}

}  // namespace gotok
