// SPDX-License-Identifier: Apache-2.0
#pragma once

// Grounded objects rendered as prompt text, and the token cost of doing so.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gotok/detection_pipeline.hpp"

namespace gotok {

enum class GoTextFormat { Class, ClassTime, ClassTimeBbox };

inline const char* to_string(GoTextFormat f) {
    switch (f) {
        case GoTextFormat::Class: return "class";
        case GoTextFormat::ClassTime: return "class_time";
        case GoTextFormat::ClassTimeBbox: return "class_time_bbox";
    }
    return "?";
}

inline GoTextFormat parse_text_format(std::string_view s) {
    if (s == "class") return GoTextFormat::Class;
    if (s == "class_time") return GoTextFormat::ClassTime;
    if (s == "class_time_bbox") return GoTextFormat::ClassTimeBbox;
    throw ValidationError("unknown text format '" + std::string(s) + "' (class|class_time|class_time_bbox)");
}

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string preamble(GoTextFormat f) {
    switch (f) {
        case GoTextFormat::Class: return "<Obj> Objects in this video are: ";
        case GoTextFormat::ClassTime:
            return "<Obj> Each object is provided with its timestamp and class label in the format of "
                   "<time, class label>. Here are the objects: ";
        case GoTextFormat::ClassTimeBbox:
            return "<Obj> Each object bounding box is provided with its timestamp and class label in the format of "
                   "<time, (x1,y1,x2,y2), class label>. Here are the objects: ";
    }
    return {};
}

inline constexpr std::string_view kClose = "</Obj>";
inline constexpr std::string_view kSeparator = ", ";

}  // namespace detail

/// Text of a single object inside the wrapper, e.g. "<91.2 second, man>".
inline std::string render_object(const Detection& d, GoTextFormat f) {
    switch (f) {
        case GoTextFormat::Class: return d.label;
        case GoTextFormat::ClassTime: return "<" + detail::fixed(d.timestamp_s, 1) + " second, " + d.label + ">";
        case GoTextFormat::ClassTimeBbox:
            return "<" + detail::fixed(d.timestamp_s, 1) + " second, (" + detail::fixed(d.bbox.x1, 4) + ", " +
                   detail::fixed(d.bbox.y1, 4) + ", " + detail::fixed(d.bbox.x2, 4) + ", " +
                   detail::fixed(d.bbox.y2, 4) + "), " + d.label + ">";
    }
    return {};
}

/// Detections ordered by timestamp, then score descending.
inline std::vector<Detection> prompt_order(std::vector<Detection> dets) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.timestamp_s != b.timestamp_s) return a.timestamp_s < b.timestamp_s;
        return a.score > b.score;
    });
    return dets;
}

/// Renders the list as given; callers order it with prompt_order(). An empty
/// list renders as the empty string.
inline std::string render_go_text(const std::vector<Detection>& dets, GoTextFormat f) {
    if (dets.empty()) return {};
    std::string out = detail::preamble(f);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (i > 0) out += detail::kSeparator;
        out += render_object(dets[i], f);
    }
    out += detail::kClose;
    return out;
}

// ---------------------------------------------------------------------------
// Token counting
// ---------------------------------------------------------------------------

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Bundled piece splitter: whitespace separates words; every punctuation or
/// bracket character is its own piece; letter runs stay whole; digit runs are
/// cut into pieces of at most two digits.
inline std::vector<std::string> split_pieces(std::string_view text) {
    std::vector<std::string> pieces;
    auto is_alpha = [](unsigned char c) { return std::isalpha(c) || c >= 0x80 || c == '_'; };
    auto is_digit = [](unsigned char c) { return std::isdigit(c) != 0; };
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_alpha(c)) {
            std::size_t j = i;
            while (j < text.size() && is_alpha(static_cast<unsigned char>(text[j]))) ++j;
            pieces.emplace_back(text.substr(i, j - i));
            i = j;
        } else if (is_digit(c)) {
            std::size_t j = i;
            while (j < text.size() && is_digit(static_cast<unsigned char>(text[j]))) ++j;
            for (std::size_t k = i; k < j; k += 2) pieces.emplace_back(text.substr(k, std::min<std::size_t>(2, j - k)));
            i = j;
        } else {
            pieces.emplace_back(1, text[i]);
            ++i;
        }
    }
    return pieces;
}

inline std::size_t bundled_count(std::string_view text) { return split_pieces(text).size(); }

inline std::size_t count_tokens(std::string_view text, const TokenCounter& counter = bundled_count) {
    return counter(text);
}

struct BudgetReport {
    std::optional<GoTextFormat> format;  ///< nullopt: one GO token per object
    std::size_t object_count = 0;
    std::size_t total_tokens = 0;
    std::size_t wrapper_tokens = 0;  ///< fixed preamble and closing tag
    double per_object_tokens = 0.0;  ///< (total - wrapper) / objects

    std::string mode() const { return format ? to_string(*format) : "go_token"; }
};

/// Token cost of the detections in a text format, or as GO tokens when
/// `format` is empty.
inline BudgetReport budget_report(const std::vector<Detection>& dets, std::optional<GoTextFormat> format,
                                  const TokenCounter& counter = bundled_count) {
    BudgetReport r;
    r.format = format;
    r.object_count = dets.size();
    if (!format) {
        r.total_tokens = dets.size();
        r.per_object_tokens = dets.empty() ? 0.0 : 1.0;
        return r;
    }
    if (dets.empty()) return r;
    r.total_tokens = counter(render_go_text(prompt_order(dets), *format));
    r.wrapper_tokens = counter(detail::preamble(*format)) + counter(detail::kClose);
    r.per_object_tokens = static_cast<double>(r.total_tokens - r.wrapper_tokens) / static_cast<double>(dets.size());
    return r;
}

inline nlohmann::ordered_json to_json(const BudgetReport& r) {
    nlohmann::ordered_json j;
    j["mode"] = r.mode();
    j["object_count"] = r.object_count;
    j["total_tokens"] = r.total_tokens;
    j["wrapper_tokens"] = r.wrapper_tokens;
    j["per_object_tokens"] = r.per_object_tokens;
    return j;
}

}  // namespace gotok
