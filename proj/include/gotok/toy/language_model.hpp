// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gotok/autodiff.hpp"
#include "gotok/random.hpp"
#include "gotok/toy/lora.hpp"

namespace gotok::toy {

struct ToyLMConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_t = 128;
    int d_v = 64;         ///< width of the visual features fed to the video projector
    int mlp_ratio = 4;
    int vocab_size = 0;
    int max_seq_len = 1024;
    LoraConfig lora;
    bool use_lora = true;  ///< false builds the plain base model
    double weight_std = 0.0;  ///< std of frozen matrices; 0 selects 1/sqrt(d_t)
    double embed_std = 0.02;

    void validate() const {
        if (n_layers < 1 || n_heads < 1 || d_t < 1 || d_v < 1 || mlp_ratio < 1 || vocab_size < 1 || max_seq_len < 1)
            throw ValidationError("toy LM dims must be positive");
        if (d_t % n_heads != 0)
            throw ValidationError("d_t=" + std::to_string(d_t) + " not divisible by n_heads=" + std::to_string(n_heads));
        if (lora.rank < 1) throw ValidationError("LoRA rank must be >= 1");
    }
};

/// Pre-norm causal transformer with rotary attention. Base weights are
/// frozen; low-rank adapters wrap the four attention projections of every
/// layer. The output head is tied to the (trainable) token embeddings.
///
/// The video projector maps mean-pooled frame features (d_v) to one video
/// token per frame and is frozen, like the visual encoder in front of it.
class ToyLM {
public:
    ToyLM(const ToyLMConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng = stream_for(seed, "toy_lm");
        const int d = cfg.d_t;
        const int hidden = d * cfg.mlp_ratio;
        const double base_std = cfg.weight_std > 0.0 ? cfg.weight_std : 1.0 / std::sqrt(static_cast<double>(d));
        const double resid_std = base_std / std::sqrt(2.0 * cfg.n_layers);

        embed_ = &reg_.add("lm.tok_embed", normal(cfg.vocab_size, d, cfg.embed_std, rng), true);
        video_proj_ = &reg_.add("lm.video_proj", normal(d, cfg.d_v, 1.0 / std::sqrt(cfg.d_v), rng), false);
        for (int l = 0; l < cfg.n_layers; ++l) {
            const std::string p = "lm.layer" + std::to_string(l);
            Layer layer;
            layer.ln1_g = &reg_.add(p + ".ln1.gain", Matrix::Ones(1, d), false);
            layer.ln1_b = &reg_.add(p + ".ln1.bias", Matrix::Zero(1, d), false);
            layer.ln2_g = &reg_.add(p + ".ln2.gain", Matrix::Ones(1, d), false);
            layer.ln2_b = &reg_.add(p + ".ln2.bias", Matrix::Zero(1, d), false);
            Parameter* wq = &reg_.add(p + ".attn.q", normal(d, d, base_std, rng), false);
            Parameter* wk = &reg_.add(p + ".attn.k", normal(d, d, base_std, rng), false);
            Parameter* wv = &reg_.add(p + ".attn.v", normal(d, d, base_std, rng), false);
            Parameter* wo = &reg_.add(p + ".attn.o", normal(d, d, resid_std, rng), false);
            layer.fc1 = &reg_.add(p + ".mlp.fc1", normal(hidden, d, base_std, rng), false);
            layer.fc2 = &reg_.add(p + ".mlp.fc2", normal(d, hidden, resid_std, rng), false);
            layer.wq = wq;
            layer.wk = wk;
            layer.wv = wv;
            layer.wo = wo;
            layers_.push_back(std::move(layer));
        }
        lnf_g_ = &reg_.add("lm.ln_f.gain", Matrix::Ones(1, d), false);
        lnf_b_ = &reg_.add("lm.ln_f.bias", Matrix::Zero(1, d), false);

        // Adapters draw from their own stream so the base weights do not
        // depend on whether LoRA is enabled.
        if (cfg.use_lora) {
            Rng lora_rng = stream_for(seed, "toy_lm.lora");
            for (int l = 0; l < cfg.n_layers; ++l) {
                const std::string p = "lm.layer" + std::to_string(l);
                Layer& layer = layers_[static_cast<std::size_t>(l)];
                layer.q = std::make_unique<LoraLinear>(reg_, p + ".attn.q", *layer.wq, cfg.lora, lora_rng);
                layer.k = std::make_unique<LoraLinear>(reg_, p + ".attn.k", *layer.wk, cfg.lora, lora_rng);
                layer.v = std::make_unique<LoraLinear>(reg_, p + ".attn.v", *layer.wv, cfg.lora, lora_rng);
                layer.o = std::make_unique<LoraLinear>(reg_, p + ".attn.o", *layer.wo, cfg.lora, lora_rng);
            }
        }
    }

    ToyLM(const ToyLM&) = delete;
    ToyLM& operator=(const ToyLM&) = delete;

    const ToyLMConfig& config() const noexcept { return cfg_; }
    ParameterRegistry& registry() noexcept { return reg_; }
    const ParameterRegistry& registry() const noexcept { return reg_; }
    const Parameter& embeddings() const noexcept { return *embed_; }
    Parameter& embeddings() noexcept { return *embed_; }

    std::vector<const LoraLinear*> adapters() const {
        std::vector<const LoraLinear*> out;
        for (const auto& l : layers_)
            for (const auto* a : {l.q.get(), l.k.get(), l.v.get(), l.o.get()})
                if (a) out.push_back(a);
        return out;
    }

    /// Video tokens (frames x d_t) from per-frame mean features (frames x d_v).
    Matrix video_tokens(const Matrix& frame_means) const { return frame_means * video_proj_->value.transpose(); }

    Var embed(Graph& g, std::span<const int> ids) const { return embedding_lookup(g.param(*embed_), ids); }

    /// Runs the transformer over `x` (T x d_t) and returns logits over the
    /// vocabulary for the requested rows.
    Var logits(Graph& g, Var x, std::span<const int> rows) const {
        if (x.rows() > cfg_.max_seq_len)
            throw ValidationError("sequence length " + std::to_string(x.rows()) + " exceeds max_seq_len " +
                                  std::to_string(cfg_.max_seq_len));
        if (x.cols() != cfg_.d_t)
            throw ValidationError("input width " + std::to_string(x.cols()) + " != d_t " + std::to_string(cfg_.d_t));
        for (const auto& l : layers_) {
            Var a = layer_norm(x, g.param(*l.ln1_g), g.param(*l.ln1_b));
            Var q = project(g, l.q.get(), *l.wq, a);
            Var k = project(g, l.k.get(), *l.wk, a);
            Var v = project(g, l.v.get(), *l.wv, a);
            Var att = causal_self_attention(q, k, v, cfg_.n_heads, true);
            x = add(x, project(g, l.o.get(), *l.wo, att));
            Var m = layer_norm(x, g.param(*l.ln2_g), g.param(*l.ln2_b));
            Var hdn = relu(matmul(m, g.param(*l.fc1), Transpose::Yes));
            x = add(x, matmul(hdn, g.param(*l.fc2), Transpose::Yes));
        }
        Var picked = embedding_lookup(x, rows);
        Var h = layer_norm(picked, g.param(*lnf_g_), g.param(*lnf_b_));
        return matmul(h, g.param(*embed_), Transpose::Yes);
    }

private:
    struct Layer {
        Parameter *ln1_g, *ln1_b, *ln2_g, *ln2_b;
        Parameter *wq, *wk, *wv, *wo, *fc1, *fc2;
        std::unique_ptr<LoraLinear> q, k, v, o;
    };

    static Matrix normal(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
        std::normal_distribution<double> dist(0.0, std);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
        return m;
    }

    static Var project(Graph& g, const LoraLinear* adapter, const Parameter& base, Var x) {
        if (adapter) return adapter->forward(g, x);
        return matmul(x, g.param(base), Transpose::Yes);
    }

    ToyLMConfig cfg_;
    ParameterRegistry reg_;
    Parameter* embed_ = nullptr;
    Parameter* video_proj_ = nullptr;
    Parameter* lnf_g_ = nullptr;
    Parameter* lnf_b_ = nullptr;
    std::vector<Layer> layers_;
};

}  // namespace gotok::toy
