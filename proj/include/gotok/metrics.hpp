// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gotok/error.hpp"

namespace gotok {

struct TemporalSegment {
    double start = 0.0;
    double end = 0.0;

    double length() const noexcept { return end - start; }
    bool valid() const noexcept { return std::isfinite(start) && std::isfinite(end) && 0.0 <= start && start <= end; }
    bool operator==(const TemporalSegment&) const = default;
    auto operator<=>(const TemporalSegment&) const = default;
};

inline void require_valid(const TemporalSegment& s) {
    if (!s.valid())
        throw ValidationError("segment [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                              "] violates 0 <= start <= end");
}

/// Temporal IoU. Two identical zero-length segments score 1; any other pair
/// with a zero-length union scores 0.
inline double segment_iou(const TemporalSegment& a, const TemporalSegment& b) {
    require_valid(a);
    require_valid(b);
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = a.length() + b.length() - inter;
    if (uni <= 0.0) return a == b ? 1.0 : 0.0;
    return inter / uni;
}

using SegmentPair = std::pair<TemporalSegment, TemporalSegment>;  ///< (prediction, ground truth)

inline double miou(std::span<const SegmentPair> pairs) {
    if (pairs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [p, g] : pairs) sum += segment_iou(p, g);
    return sum / static_cast<double>(pairs.size());
}

/// Fraction of pairs whose IoU is at least tau.
inline double p_at(std::span<const SegmentPair> pairs, double tau) {
    if (pairs.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& [p, g] : pairs)
        if (segment_iou(p, g) >= tau) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

inline constexpr std::array<double, 3> kF1Thresholds{0.3, 0.5, 0.7};

/// Greedy one-to-one matching at one threshold: candidate pairs with
/// IoU >= tau are taken in descending IoU order (ties by prediction index,
/// then ground-truth index) while both sides are unused.
inline std::size_t greedy_match_count(std::span<const TemporalSegment> pred, std::span<const TemporalSegment> gt,
                                      double tau) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = 0; j < gt.size(); ++j) {
            const double iou = segment_iou(pred[i], gt[j]);
            if (iou >= tau) cand.emplace_back(iou, i, j);
        }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    std::vector<bool> used_p(pred.size()), used_g(gt.size());
    std::size_t matches = 0;
    for (const auto& [iou, i, j] : cand) {
        if (used_p[i] || used_g[j]) continue;
        used_p[i] = used_g[j] = true;
        ++matches;
    }
    return matches;
}

inline double f1_from_counts(std::size_t matches, std::size_t n_pred, std::size_t n_gt) {
    if (n_pred == 0 && n_gt == 0) return 1.0;
    if (matches == 0) return 0.0;
    const double precision = static_cast<double>(matches) / static_cast<double>(n_pred);
    const double recall = static_cast<double>(matches) / static_cast<double>(n_gt);
    return 2.0 * precision * recall / (precision + recall);
}

/// Event-level F1 averaged over IoU thresholds {0.3, 0.5, 0.7}. Two empty
/// lists agree perfectly and score 1.
inline double dense_caption_f1(std::span<const TemporalSegment> pred, std::span<const TemporalSegment> gt) {
    double sum = 0.0;
    for (double tau : kF1Thresholds) sum += f1_from_counts(greedy_match_count(pred, gt, tau), pred.size(), gt.size());
    return sum / static_cast<double>(kF1Thresholds.size());
}

struct EvalReport {
    double miou = 0.0;
    double p_at_05 = 0.0;
    double f1 = 0.0;
    std::size_t n_items = 0;
    std::string protocol;
};

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["miou"] = r.miou;
    j["p_at_0.5"] = r.p_at_05;
    j["f1"] = r.f1;
    j["n_items"] = r.n_items;
    j["protocol"] = r.protocol;
    return j;
}

// ---------------------------------------------------------------------------
// Segment files: JSON Lines {"id": str, "segments": [[s, e], ...],
//                            "captions": [str, ...] (optional)}
// ---------------------------------------------------------------------------

struct SegmentRecord {
    std::string id;
    std::vector<TemporalSegment> segments;
    std::vector<std::string> captions;
};

inline std::vector<SegmentRecord> parse_segment_records(std::istream& in) {
    std::vector<SegmentRecord> out;
    std::string text;
    std::size_t line = 0;
    auto fail = [&](const std::string& field, const std::string& msg) {
        throw ValidationError("line " + std::to_string(line) + ": field '" + field + "': " + msg);
    };
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            fail("<record>", std::string("malformed JSON: ") + e.what());
        }
        SegmentRecord rec;
        if (!j.contains("id") || !j["id"].is_string()) fail("id", "missing or not a string");
        rec.id = j["id"].get<std::string>();
        if (!j.contains("segments") || !j["segments"].is_array()) fail("segments", "missing or not an array");
        for (const auto& s : j["segments"]) {
            if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
                fail("segments", "each segment must be [start, end]");
            TemporalSegment seg{s[0].get<double>(), s[1].get<double>()};
            if (!seg.valid()) fail("segments", "segment violates 0 <= start <= end");
            rec.segments.push_back(seg);
        }
        if (j.contains("captions")) {
            if (!j["captions"].is_array()) fail("captions", "not an array");
            for (const auto& c : j["captions"]) {
                if (!c.is_string()) fail("captions", "entries must be strings");
                rec.captions.push_back(c.get<std::string>());
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

namespace detail {
inline std::map<std::string, const SegmentRecord*> index_by_id(const std::vector<SegmentRecord>& recs) {
    std::map<std::string, const SegmentRecord*> m;
    for (const auto& r : recs)
        if (!m.emplace(r.id, &r).second) throw ValidationError("duplicate id '" + r.id + "'");
    return m;
}
}  // namespace detail

/// Temporal localization: the i-th predicted segment of an id is scored
/// against its i-th ground-truth segment; a missing prediction scores IoU 0.
inline EvalReport evaluate_localization(const std::vector<SegmentRecord>& predictions,
                                        const std::vector<SegmentRecord>& ground_truth) {
    const auto preds = detail::index_by_id(predictions);
    std::vector<SegmentPair> pairs;
    std::size_t missing = 0;
    for (const auto& g : ground_truth) {
        auto it = preds.find(g.id);
        for (std::size_t i = 0; i < g.segments.size(); ++i) {
            if (it != preds.end() && i < it->second->segments.size())
                pairs.emplace_back(it->second->segments[i], g.segments[i]);
            else
                ++missing;
        }
    }
    EvalReport r;
    r.n_items = pairs.size() + missing;
    r.protocol = "index-paired segments; missing prediction = IoU 0; hit iff IoU >= 0.5";
    if (r.n_items == 0) return r;
    const double scale = static_cast<double>(pairs.size()) / static_cast<double>(r.n_items);
    r.miou = miou(pairs) * scale;
    r.p_at_05 = p_at(pairs, 0.5) * scale;
    return r;
}

/// Dense captioning: per ground-truth id, dense_caption_f1 of its event
/// lists (missing prediction = empty list), averaged over ids.
inline EvalReport evaluate_dense_captioning(const std::vector<SegmentRecord>& predictions,
                                            const std::vector<SegmentRecord>& ground_truth) {
    const auto preds = detail::index_by_id(predictions);
    EvalReport r;
    r.protocol = "greedy one-to-one matching by descending IoU, F1 averaged over IoU thresholds {0.3, 0.5, 0.7}";
    double sum = 0.0;
    for (const auto& g : ground_truth) {
        auto it = preds.find(g.id);
        static const std::vector<TemporalSegment> kEmpty;
        const auto& p = it == preds.end() ? kEmpty : it->second->segments;
        sum += dense_caption_f1(p, g.segments);
        ++r.n_items;
    }
    if (r.n_items > 0) r.f1 = sum / static_cast<double>(r.n_items);
    return r;
}

}  // namespace gotok
