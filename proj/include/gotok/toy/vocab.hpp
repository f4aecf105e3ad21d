// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gotok/error.hpp"
#include "gotok/text_prompting.hpp"

namespace gotok::toy {

/// Everyday nouns used as synthetic category labels. Single letter runs, so
/// each label is exactly one piece for the bundled counter.
inline const std::vector<std::string>& default_category_names() {
    static const std::vector<std::string> names{
        "man",   "woman", "dog",   "ball",  "car",   "bike",  "cup",   "knife", "pan",   "bowl",  "chair",
        "table", "horse", "boat",  "tree",  "door",  "phone", "bag",   "hat",   "box",   "lamp",  "book",
        "shoe",  "plate", "spoon", "fork",  "bottle", "clock", "kite", "bird",  "cat",   "sink"};
    return names;
}

/// `n` category labels; past the built-in list, letter-only names are generated.
inline std::vector<std::string> category_names(int n) {
    if (n < 1) throw ValidationError("need at least one category");
    const auto& base = default_category_names();
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(i) < base.size()) {
            out.push_back(base[static_cast<std::size_t>(i)]);
        } else {
            const int j = i - static_cast<int>(base.size());
            out.push_back(std::string("obj") + static_cast<char>('a' + (j / 26) % 26) + static_cast<char>('a' + j % 26));
        }
    }
    return out;
}

/// Closed vocabulary of the toy language model: control tokens, question
/// words, category labels, frame-slot answer tokens T0..T{F-1}, and every
/// piece the bundled splitter produces on rendered object text.
class ToyVocab {
public:
    ToyVocab(const std::vector<std::string>& categories, int frames) : frames_(frames) {
        if (frames < 1) throw ValidationError("vocabulary needs at least one frame slot");
        for (const char* s : {"<pad>", "<unk>", "<bos>", "when", "does", "appear", "?"}) intern(s);
        for (const auto& c : categories) {
            if (ids_.contains(c)) throw ValidationError("category label '" + c + "' collides with a reserved token");
            category_ids_.push_back(intern(c));
        }
        for (int i = 0; i < frames; ++i) slot_ids_.push_back(intern("<T" + std::to_string(i) + ">"));
        for (auto f : {GoTextFormat::Class, GoTextFormat::ClassTime, GoTextFormat::ClassTimeBbox}) {
            Detection probe;
            probe.label = "man";
            std::vector<Detection> one{probe};
            for (const auto& p : split_pieces(render_go_text(one, f))) intern(p);
        }
        for (int d = 0; d < 10; ++d) intern(std::to_string(d));
        for (int d = 0; d < 100; ++d) intern((d < 10 ? "0" : "") + std::to_string(d));
        for (const char* s : {"<", ">", "(", ")", ",", ".", ":", "/", "-"}) intern(s);
    }

    int size() const noexcept { return static_cast<int>(tokens_.size()); }
    int frames() const noexcept { return frames_; }
    int unk() const noexcept { return 1; }
    int bos() const noexcept { return 2; }
    int when() const noexcept { return 3; }
    int does() const noexcept { return 4; }
    int appear() const noexcept { return 5; }
    int question_mark() const noexcept { return 6; }

    int category(int c) const { return category_ids_.at(static_cast<std::size_t>(c)); }
    int slot(int s) const { return slot_ids_.at(static_cast<std::size_t>(s)); }
    const std::vector<int>& slot_ids() const noexcept { return slot_ids_; }

    int id(std::string_view token) const {
        auto it = ids_.find(std::string(token));
        return it == ids_.end() ? unk() : it->second;
    }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    /// Bundled-splitter pieces of `text` mapped to ids.
    std::vector<int> encode_text(std::string_view text) const {
        std::vector<int> out;
        for (const auto& p : split_pieces(text)) out.push_back(id(p));
        return out;
    }

private:
    int intern(const std::string& tok) {
        auto [it, inserted] = ids_.emplace(tok, static_cast<int>(tokens_.size()));
        if (inserted) tokens_.push_back(tok);
        return it->second;
    }

    int frames_;
    std::vector<std::string> tokens_;
    std::map<std::string, int> ids_;
    std::vector<int> category_ids_;
    std::vector<int> slot_ids_;
};

}  // namespace gotok::toy
