// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gotok/binary_io.hpp"
#include "gotok/detection_pipeline.hpp"
#include "gotok/go_tokenizer.hpp"
#include "gotok/text_prompting.hpp"
#include "gotok/toy/language_model.hpp"
#include "gotok/toy/synthetic.hpp"
#include "gotok/toy/vocab.hpp"

namespace gotok::toy {

/// How grounded objects reach the language model.
enum class GroundingMode { Go, Text, None };

inline const char* to_string(GroundingMode m) {
    switch (m) {
        case GroundingMode::Go: return "go";
        case GroundingMode::Text: return "text";
        case GroundingMode::None: return "none";
    }
    return "?";
}

inline GroundingMode parse_grounding_mode(std::string_view s) {
    if (s == "go") return GroundingMode::Go;
    if (s == "text") return GroundingMode::Text;
    if (s == "none") return GroundingMode::None;
    throw ValidationError("unknown mode '" + std::string(s) + "' (expected go, text or none)");
}

struct GoVideoConfig {
    ToyLMConfig lm;
    GoTokenizerConfig tokenizer;
    SamplingConfig sampling;  ///< frames is taken from the vocabulary
    GoTextFormat text_format = GoTextFormat::ClassTime;
    bool text_after_question = false;  ///< text mode: repeat the object list after every question
};

/// Everything fed to the model for one video. The questions are answered
/// one after another behind a shared video/object prefix.
struct VideoExample {
    std::span<const FrameFeatureMap> frames;
    std::span<const Detection> detections;
    std::span<const QaPair> questions;
};

inline VideoExample as_example(const SyntheticSample& s) { return {s.frames, s.detections, {&s.qa, 1}}; }

struct ForwardResult {
    Var logits;  ///< (answer tokens over all questions) x vocab
    Var loss;    ///< 1 x 1, mean cross-entropy over answer tokens
    std::vector<int> targets;  ///< answer ids in logit-row order
    int video_count = 0;
    int object_count = 0;
    int text_count = 0;

    int sequence_length() const noexcept { return video_count + object_count + text_count; }
};

/// Toy GO-Video: frozen synthetic encoder in front, GO-Tokenizer in the
/// middle, LoRA-adapted toy LM at the end. The sequence is
/// video (one token per frame) + object tokens + text, where text is the
/// rendered object list (text mode only) followed by each question and its
/// teacher-forced answer.
class GoVideoModel {
public:
    GoVideoModel(const GoVideoConfig& cfg, const ToyVocab& vocab, std::uint64_t seed)
        : cfg_(with_vocab(cfg, vocab)),
          vocab_(vocab),
          tokenizer_(GoTokenizerParams::initialized(cfg_.tokenizer, seed)),
          lm_(cfg_.lm, seed) {
        if (cfg_.lm.d_t != cfg_.tokenizer.d_t || cfg_.lm.d_v != cfg_.tokenizer.d_v)
            throw ValidationError("LM and tokenizer disagree on d_t / d_v");
    }

    const GoVideoConfig& config() const noexcept { return cfg_; }
    const ToyVocab& vocab() const noexcept { return vocab_; }
    GoTokenizerParams& tokenizer() noexcept { return tokenizer_; }
    const GoTokenizerParams& tokenizer() const noexcept { return tokenizer_; }
    ToyLM& lm() noexcept { return lm_; }
    const ToyLM& lm() const noexcept { return lm_; }

    /// Parameters updated in `mode`: tokenizer tables (go mode only), LoRA
    /// adapters and token embeddings.
    std::vector<Parameter*> trainable_parameters(GroundingMode mode) {
        std::vector<Parameter*> out;
        if (mode == GroundingMode::Go)
            for (Parameter* p : tokenizer_.parameters()) out.push_back(p);
        for (Parameter* p : lm_.registry().trainable()) out.push_back(p);
        return out;
    }

    std::vector<const Parameter*> all_parameters() const {
        std::vector<const Parameter*> out;
        for (const Parameter* p : tokenizer_.parameters()) out.push_back(p);
        for (const Parameter* p : lm_.registry().all()) out.push_back(p);
        return out;
    }

    /// Object segment detections for go/text modes: top-k per slot, then
    /// in token order.
    std::vector<Detection> grounded(std::span<const Detection> dets) const {
        return select_detections(std::vector<Detection>(dets.begin(), dets.end()), cfg_.sampling);
    }

    /// Ids of the text segment; `answer_rows` receives, per answer token,
    /// its offset within the segment.
    std::vector<int> text_ids(const VideoExample& ex, GroundingMode mode, std::vector<int>* answer_rows = nullptr) const {
        std::vector<int> ids, go_text;
        if (mode == GroundingMode::Text)
            go_text = vocab_.encode_text(render_go_text(prompt_order(grounded(ex.detections)), cfg_.text_format));
        if (!cfg_.text_after_question) ids = go_text;
        for (const auto& qa : ex.questions) {
            ids.insert(ids.end(), qa.question_ids.begin(), qa.question_ids.end());
            if (cfg_.text_after_question) ids.insert(ids.end(), go_text.begin(), go_text.end());
            for (int a : qa.answer_ids) {
                if (answer_rows) answer_rows->push_back(static_cast<int>(ids.size()));
                ids.push_back(a);
            }
        }
        return ids;
    }

    ForwardResult forward(Graph& g, const VideoExample& ex, GroundingMode mode) const {
        if (ex.questions.empty()) throw ValidationError("example has no question");
        for (const auto& qa : ex.questions)
            if (qa.question_ids.empty() || qa.answer_ids.empty())
                throw ValidationError("question and answer must not be empty");
        const int d_v = cfg_.tokenizer.d_v;

        Matrix means(static_cast<Eigen::Index>(ex.frames.size()), d_v);
        for (std::size_t f = 0; f < ex.frames.size(); ++f) {
            const Matrix m = to_matrix(ex.frames[f]);
            means.row(static_cast<Eigen::Index>(f)) = m.colwise().mean();
        }
        std::vector<Var> parts;
        parts.push_back(g.constant(lm_.video_tokens(means)));

        ForwardResult r;
        r.video_count = static_cast<int>(ex.frames.size());
        if (mode == GroundingMode::Go) {
            const auto objects = to_grounded_objects(grounded(ex.detections));
            if (!objects.empty()) parts.push_back(tokenize_objects(g, tokenizer_, ex.frames, objects));
            r.object_count = static_cast<int>(objects.size());
        }
        std::vector<int> answer_rows;
        const auto ids = text_ids(ex, mode, &answer_rows);
        r.text_count = static_cast<int>(ids.size());
        parts.push_back(lm_.embed(g, ids));

        const int total = r.sequence_length();
        if (total > cfg_.lm.max_seq_len)
            throw ValidationError("sequence length " + std::to_string(total) + " exceeds max_seq_len " +
                                  std::to_string(cfg_.lm.max_seq_len));

        // Row t predicts token t + 1, so each answer token is scored on the
        // row just before it.
        const int text_start = r.video_count + r.object_count;
        std::vector<int> rows;
        for (int off : answer_rows) {
            rows.push_back(text_start + off - 1);
            r.targets.push_back(ids[static_cast<std::size_t>(off)]);
        }
        r.logits = lm_.logits(g, concat_rows(parts), rows);
        r.loss = softmax_cross_entropy(r.logits, r.targets);
        return r;
    }

private:
    static GoVideoConfig with_vocab(GoVideoConfig cfg, const ToyVocab& vocab) {
        cfg.lm.vocab_size = vocab.size();
        cfg.tokenizer.f_max = vocab.frames();
        cfg.sampling.frames = vocab.frames();
        cfg.lm.d_t = cfg.tokenizer.d_t;
        cfg.lm.d_v = cfg.tokenizer.d_v;
        return cfg;
    }

    GoVideoConfig cfg_;
    ToyVocab vocab_;
    GoTokenizerParams tokenizer_;
    ToyLM lm_;
};

// ---------------------------------------------------------------------------
// Checkpoint: a GOTP block, then "GOLM" | u16 version=1 | u32 count | per
// parameter: u16 name length, name, u32 rows, u32 cols, float32 values.
// ---------------------------------------------------------------------------

inline void write_checkpoint(const GoVideoModel& model, std::ostream& out) {
    write_gotp(model.tokenizer(), out);
    out.write("GOLM", 4);
    binary::put(out, std::uint16_t{1});
    const auto params = model.lm().registry().all();
    binary::put(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        binary::put(out, static_cast<std::uint16_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        binary::put(out, static_cast<std::uint32_t>(p->value.rows()));
        binary::put(out, static_cast<std::uint32_t>(p->value.cols()));
        for (Eigen::Index i = 0; i < p->value.size(); ++i) binary::put_f32(out, static_cast<float>(p->value.data()[i]));
    }
    if (!out) throw IoError("checkpoint: write failed");
}

/// Loads weights into an already constructed model of the same shape.
inline void read_checkpoint(GoVideoModel& model, std::istream& in) {
    GoTokenizerParams tok = read_gotp(in);
    if (!(tok.config == model.tokenizer().config)) throw ValidationError("checkpoint: tokenizer dims differ");
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "GOLM") throw ValidationError("checkpoint: missing LM section");
    std::uint16_t version = 0;
    std::uint32_t count = 0;
    if (!binary::get(in, version) || !binary::get(in, count)) throw ValidationError("checkpoint: truncated LM header");
    if (version != 1) throw ValidationError("checkpoint: unsupported LM version " + std::to_string(version));
    auto& reg = model.lm().registry();
    if (count != reg.all().size()) throw ValidationError("checkpoint: LM parameter count differs");
    for (std::uint32_t n = 0; n < count; ++n) {
        std::uint16_t len = 0;
        if (!binary::get(in, len)) throw ValidationError("checkpoint: truncated parameter name");
        std::string name(len, '\0');
        in.read(name.data(), len);
        std::uint32_t rows = 0, cols = 0;
        if (in.gcount() != len || !binary::get(in, rows) || !binary::get(in, cols))
            throw ValidationError("checkpoint: truncated parameter header");
        Parameter& p = reg.at(name);
        if (rows != p.value.rows() || cols != p.value.cols())
            throw ValidationError("checkpoint: shape mismatch for " + name);
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            float v = 0.0f;
            if (!binary::get_f32(in, v)) throw ValidationError("checkpoint: truncated values of " + name);
            p.value.data()[i] = v;
        }
    }
    model.tokenizer().pos_embed.value = tok.pos_embed.value;
    model.tokenizer().projection.value = tok.projection.value;
    model.tokenizer().time_embed.value = tok.time_embed.value;
}

}  // namespace gotok::toy
