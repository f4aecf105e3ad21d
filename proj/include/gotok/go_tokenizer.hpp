// SPDX-License-Identifier: Apache-2.0
#pragma once

// Grounded-object tokenizer: each detected object becomes one token
//
//   F_i = Phi_v(V_i) + P_e                 patch positional enrichment
//   h_j = mean of F_i over covered cells   ROI patch pooling
//   o_j = W_o^T h_j + q_i                  projection plus frame-slot embedding
//
// and the LLM input is video tokens, then object tokens, then text tokens.
// Everything is available twice: as plain double-precision functions with a
// hand-written adjoint (TokenizerTape) and as Graph ops for end-to-end
// training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gotok/autodiff.hpp"
#include "gotok/binary_io.hpp"
#include "gotok/feature_store.hpp"
#include "gotok/geometry.hpp"
#include "gotok/random.hpp"

namespace gotok {

struct GoTokenizerConfig {
    int n_p = 14;
    int d_v = 64;
    int d_t = 128;
    int f_max = 8;

    void validate() const {
        if (n_p < 1 || d_v < 1 || d_t < 1 || f_max < 1)
            throw ValidationError("tokenizer dims must be positive (n_p=" + std::to_string(n_p) +
                                  ", d_v=" + std::to_string(d_v) + ", d_t=" + std::to_string(d_t) +
                                  ", f_max=" + std::to_string(f_max) + ")");
    }
    bool operator==(const GoTokenizerConfig&) const = default;
};

/// Learnable tokenizer state: P_e (n_p^2 x d_v, one row per patch in
/// row-major order), W_o (d_v x d_t) and the frame-slot table Q (f_max x d_t).
struct GoTokenizerParams {
    GoTokenizerConfig config;
    Parameter pos_embed;
    Parameter projection;
    Parameter time_embed;

    GoTokenizerParams() = default;

    explicit GoTokenizerParams(const GoTokenizerConfig& cfg) : config(cfg) {
        cfg.validate();
        pos_embed = {"go.pos_embed", Matrix::Zero(cfg.n_p * cfg.n_p, cfg.d_v), true};
        projection = {"go.projection", Matrix::Zero(cfg.d_v, cfg.d_t), true};
        time_embed = {"go.time_embed", Matrix::Zero(cfg.f_max, cfg.d_t), true};
    }

    /// P_e, Q ~ N(0, 0.02^2); W_o ~ U(-a, a) with a = sqrt(6 / (d_v + d_t)).
    static GoTokenizerParams initialized(const GoTokenizerConfig& cfg, std::uint64_t seed) {
        GoTokenizerParams p(cfg);
        Rng rng = stream_for(seed, "go_tokenizer");
        std::normal_distribution<double> normal(0.0, 0.02);
        const double a = std::sqrt(6.0 / (cfg.d_v + cfg.d_t));
        std::uniform_real_distribution<double> uni(-a, a);
        for (Eigen::Index i = 0; i < p.pos_embed.value.size(); ++i) p.pos_embed.value.data()[i] = normal(rng);
        for (Eigen::Index i = 0; i < p.projection.value.size(); ++i) p.projection.value.data()[i] = uni(rng);
        for (Eigen::Index i = 0; i < p.time_embed.value.size(); ++i) p.time_embed.value.data()[i] = normal(rng);
        return p;
    }

    std::vector<Parameter*> parameters() { return {&pos_embed, &projection, &time_embed}; }
    std::vector<const Parameter*> parameters() const { return {&pos_embed, &projection, &time_embed}; }

    bool all_finite() const {
        return pos_embed.value.allFinite() && projection.value.allFinite() && time_embed.value.allFinite();
    }
};

/// Provenance of an object token.
struct TokenSource {
    std::size_t detection_id = 0;
    double score = 1.0;
};

struct ObjectToken {
    RowVector vector;
    int frame_slot = 0;
    TokenSource source;
};

/// One object to tokenize: where it was seen and its box.
struct GroundedObject {
    int frame_slot = 0;
    BBox bbox;
    TokenSource source;
};

/// Frame slot ascending, then score descending, then detection id ascending.
inline bool object_order(int slot_a, const TokenSource& a, int slot_b, const TokenSource& b) {
    if (slot_a != slot_b) return slot_a < slot_b;
    if (a.score != b.score) return a.score > b.score;
    return a.detection_id < b.detection_id;
}

inline void sort_objects(std::vector<GroundedObject>& objects) {
    std::stable_sort(objects.begin(), objects.end(), [](const GroundedObject& a, const GroundedObject& b) {
        return object_order(a.frame_slot, a.source, b.frame_slot, b.source);
    });
}

inline Matrix to_matrix(const FrameFeatureMap& map) {
    Matrix m(map.patch_count(), map.d_v());
    const auto v = map.values();
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(v[static_cast<std::size_t>(i)]);
    return m;
}

namespace detail {
inline void check_map_dims(const FrameFeatureMap& map, const GoTokenizerConfig& cfg) {
    if (map.n_p() != cfg.n_p || map.d_v() != cfg.d_v)
        throw ValidationError("feature map is " + std::to_string(map.n_p()) + "x" + std::to_string(map.n_p()) + "x" +
                              std::to_string(map.d_v()) + " but the tokenizer expects " + std::to_string(cfg.n_p) +
                              "x" + std::to_string(cfg.n_p) + "x" + std::to_string(cfg.d_v));
}

inline void check_slot(int slot, const GoTokenizerConfig& cfg) {
    if (slot < 0 || slot >= cfg.f_max)
        throw ValidationError("frame slot " + std::to_string(slot) + " outside [0, " + std::to_string(cfg.f_max) + ")");
}
}  // namespace detail

/// F_i = Phi_v(V_i) + P_e, as an (n_p^2 x d_v) matrix.
inline Matrix add_positional(const FrameFeatureMap& map, const GoTokenizerParams& params) {
    detail::check_map_dims(map, params.config);
    return to_matrix(map) + params.pos_embed.value;
}

/// Average of the patch rows covered by `bbox`.
inline RowVector roi_patch_pool(const Matrix& positioned, int n_p, const BBox& bbox) {
    if (positioned.rows() != static_cast<Eigen::Index>(n_p) * n_p)
        throw ValidationError("roi_patch_pool: map has " + std::to_string(positioned.rows()) + " patches, expected " +
                              std::to_string(n_p * n_p));
    const PatchSet cells = covered_patches(bbox, PatchGrid(n_p));
    RowVector h = RowVector::Zero(positioned.cols());
    for (auto [r, c] : cells) h += positioned.row(r * n_p + c);
    return h / static_cast<double>(cells.size());
}

/// o = W_o^T h + q[frame_slot].
inline ObjectToken emit_object_token(const RowVector& h, int frame_slot, const GoTokenizerParams& params,
                                     TokenSource source = {}) {
    detail::check_slot(frame_slot, params.config);
    if (h.cols() != params.config.d_v)
        throw ValidationError("pooled feature has width " + std::to_string(h.cols()) + ", expected d_v=" +
                              std::to_string(params.config.d_v));
    ObjectToken tok;
    tok.vector = h * params.projection.value + params.time_embed.value.row(frame_slot);
    tok.frame_slot = frame_slot;
    tok.source = source;
    return tok;
}

/// Concatenated LLM input: rows [0, K) video, [K, K+N) objects, [K+N, K+N+L) text.
struct TokenSequence {
    Matrix embeddings;
    Eigen::Index video_count = 0;
    Eigen::Index object_count = 0;
    Eigen::Index text_count = 0;

    Eigen::Index length() const noexcept { return video_count + object_count + text_count; }
    Eigen::Index object_begin() const noexcept { return video_count; }
    Eigen::Index text_begin() const noexcept { return video_count + object_count; }
};

/// Object tokens are placed in object_order(); the input list may be in any order.
inline TokenSequence assemble_sequence(const Matrix& video_tokens, std::vector<ObjectToken> objects,
                                       const Matrix& text_tokens) {
    Eigen::Index width = -1;
    auto check = [&](Eigen::Index cols, Eigen::Index rows, const char* what) {
        if (rows == 0 && cols == 0) return;
        if (width < 0) width = cols;
        if (cols != width)
            throw ValidationError(std::string("assemble_sequence: ") + what + " width " + std::to_string(cols) +
                                  " != " + std::to_string(width));
    };
    check(video_tokens.cols(), video_tokens.rows(), "video token");
    for (const auto& o : objects) check(o.vector.cols(), 1, "object token");
    check(text_tokens.cols(), text_tokens.rows(), "text token");
    if (width < 0) width = 0;

    std::stable_sort(objects.begin(), objects.end(), [](const ObjectToken& a, const ObjectToken& b) {
        return object_order(a.frame_slot, a.source, b.frame_slot, b.source);
    });

    TokenSequence seq;
    seq.video_count = video_tokens.rows();
    seq.object_count = static_cast<Eigen::Index>(objects.size());
    seq.text_count = text_tokens.rows();
    seq.embeddings.resize(seq.length(), width);
    if (seq.video_count > 0) seq.embeddings.topRows(seq.video_count) = video_tokens;
    for (Eigen::Index i = 0; i < seq.object_count; ++i)
        seq.embeddings.row(seq.video_count + i) = objects[static_cast<std::size_t>(i)].vector;
    if (seq.text_count > 0) seq.embeddings.bottomRows(seq.text_count) = text_tokens;
    return seq;
}

// ---------------------------------------------------------------------------
// Hand-written adjoint
// ---------------------------------------------------------------------------

struct TokenizerGradients {
    Matrix pos_embed;
    Matrix projection;
    Matrix time_embed;
};

/// Records one tokenizer forward pass (pooled features, covered cells, frame
/// slots) so that gradients can be pulled back from the emitted tokens.
class TokenizerTape {
public:
    /// Tokenizes `objects` (kept in the given order) against the frame maps,
    /// which are looked up by frame_slot. Returns N x d_t.
    Matrix forward(const GoTokenizerParams& params, std::span<const FrameFeatureMap> frames,
                   std::span<const GroundedObject> objects) {
        config_ = params.config;
        projection_ = params.projection.value;
        records_.clear();
        std::map<int, Matrix> positioned;
        for (const auto& f : frames) {
            detail::check_map_dims(f, config_);
            positioned[static_cast<int>(f.frame_slot())] = add_positional(f, params);
        }
        Matrix out(static_cast<Eigen::Index>(objects.size()), config_.d_t);
        for (std::size_t j = 0; j < objects.size(); ++j) {
            const auto& obj = objects[j];
            detail::check_slot(obj.frame_slot, config_);
            auto it = positioned.find(obj.frame_slot);
            if (it == positioned.end())
                throw ValidationError("no feature map for frame slot " + std::to_string(obj.frame_slot));
            Record rec{obj.frame_slot, covered_patches(obj.bbox, PatchGrid(config_.n_p)), {}};
            rec.pooled = roi_patch_pool(it->second, config_.n_p, obj.bbox);
            out.row(static_cast<Eigen::Index>(j)) = emit_object_token(rec.pooled, obj.frame_slot, params).vector;
            records_.push_back(std::move(rec));
        }
        recorded_ = true;
        return out;
    }

    bool recorded() const noexcept { return recorded_; }

    /// Gradients of a scalar loss given dL/d(token j) as row j of `upstream`.
    TokenizerGradients gradients(const Matrix& upstream) const {
        if (!recorded_) throw ValidationError("tokenizer gradients requested without a recorded forward pass");
        if (upstream.rows() != static_cast<Eigen::Index>(records_.size()) || upstream.cols() != config_.d_t)
            throw ValidationError("upstream gradient is " + shape_str(upstream) + ", expected " +
                                  std::to_string(records_.size()) + "x" + std::to_string(config_.d_t));
        TokenizerGradients g{Matrix::Zero(config_.n_p * config_.n_p, config_.d_v), Matrix::Zero(config_.d_v, config_.d_t),
                             Matrix::Zero(config_.f_max, config_.d_t)};
        for (std::size_t j = 0; j < records_.size(); ++j) {
            const auto& rec = records_[j];
            const auto gj = upstream.row(static_cast<Eigen::Index>(j));
            g.time_embed.row(rec.frame_slot) += gj;
            g.projection.noalias() += rec.pooled.transpose() * gj;
            const RowVector dh = gj * projection_.transpose();
            const double w = 1.0 / static_cast<double>(rec.cells.size());
            for (auto [r, c] : rec.cells) g.pos_embed.row(r * config_.n_p + c) += dh * w;
        }
        return g;
    }

private:
    struct Record {
        int frame_slot;
        PatchSet cells;
        RowVector pooled;
    };

    GoTokenizerConfig config_;
    Matrix projection_;
    std::vector<Record> records_;
    bool recorded_ = false;
};

// ---------------------------------------------------------------------------
// Graph path
// ---------------------------------------------------------------------------

/// Object tokens as a graph node (N x d_t, objects kept in the given order).
/// Gradients reach P_e, W_o and Q; the feature maps are constants.
inline Var tokenize_objects(Graph& g, const GoTokenizerParams& params, std::span<const FrameFeatureMap> frames,
                            std::span<const GroundedObject> objects) {
    const auto& cfg = params.config;
    if (objects.empty()) return g.constant(Matrix(0, cfg.d_t));
    Var pe = g.param(params.pos_embed);
    Var wo = g.param(params.projection);
    Var q = g.param(params.time_embed);

    std::map<int, Var> positioned;
    for (const auto& obj : objects) {
        detail::check_slot(obj.frame_slot, cfg);
        if (positioned.contains(obj.frame_slot)) continue;
        const FrameFeatureMap* map = nullptr;
        for (const auto& f : frames)
            if (static_cast<int>(f.frame_slot()) == obj.frame_slot) map = &f;
        if (!map) throw ValidationError("no feature map for frame slot " + std::to_string(obj.frame_slot));
        detail::check_map_dims(*map, cfg);
        positioned.emplace(obj.frame_slot, add(g.constant(to_matrix(*map)), pe));
    }

    std::vector<Var> pooled;
    std::vector<int> slots;
    pooled.reserve(objects.size());
    for (const auto& obj : objects) {
        const auto cells = covered_patches(obj.bbox, PatchGrid(cfg.n_p)).flat(cfg.n_p);
        pooled.push_back(mean_over_index_set(positioned.at(obj.frame_slot), cells));
        slots.push_back(obj.frame_slot);
    }
    Var h = concat_rows(pooled);
    return add(matmul(h, wo), embedding_lookup(q, slots));
}

// ---------------------------------------------------------------------------
// GOTP checkpoint: "GOTP" | u16 version=1 | u16 n_p | u32 d_v | u32 d_t |
// u32 f_max | P_e, W_o, Q as float32 in that order
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kGotpVersion = 1;

inline void write_gotp(const GoTokenizerParams& params, std::ostream& out) {
    const auto& c = params.config;
    out.write("GOTP", 4);
    binary::put(out, kGotpVersion);
    binary::put(out, static_cast<std::uint16_t>(c.n_p));
    binary::put(out, static_cast<std::uint32_t>(c.d_v));
    binary::put(out, static_cast<std::uint32_t>(c.d_t));
    binary::put(out, static_cast<std::uint32_t>(c.f_max));
    for (const Parameter* p : params.parameters())
        for (Eigen::Index i = 0; i < p->value.size(); ++i) binary::put_f32(out, static_cast<float>(p->value.data()[i]));
    if (!out) throw IoError("GOTP: write failed");
}

inline GoTokenizerParams read_gotp(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "GOTP") throw ValidationError("GOTP: bad magic");
    std::uint16_t version = 0, n_p = 0;
    std::uint32_t d_v = 0, d_t = 0, f_max = 0;
    if (!binary::get(in, version) || !binary::get(in, n_p) || !binary::get(in, d_v) || !binary::get(in, d_t) ||
        !binary::get(in, f_max))
        throw ValidationError("GOTP: truncated header");
    if (version != kGotpVersion) throw ValidationError("GOTP: unsupported version " + std::to_string(version));
    constexpr std::uint32_t kMaxDim = 1u << 16;
    if (n_p == 0 || d_v == 0 || d_t == 0 || f_max == 0 || d_v > kMaxDim || d_t > kMaxDim || f_max > kMaxDim)
        throw ValidationError("GOTP: dimension out of range");
    GoTokenizerParams params(GoTokenizerConfig{n_p, static_cast<int>(d_v), static_cast<int>(d_t), static_cast<int>(f_max)});
    for (Parameter* p : params.parameters())
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            float v = 0.0f;
            if (!binary::get_f32(in, v)) throw ValidationError("GOTP: truncated payload in " + p->name);
            p->value.data()[i] = v;
        }
    return params;
}

}  // namespace gotok
