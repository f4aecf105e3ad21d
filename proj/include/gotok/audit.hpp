// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-difference audit of every numeric-core op and of the tokenizer's
// learnable tables through a full forward pass.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gotok/autodiff.hpp"
#include "gotok/feature_store.hpp"
#include "gotok/go_tokenizer.hpp"
#include "gotok/gradcheck.hpp"
#include "gotok/random.hpp"

namespace gotok {

struct AuditEntry {
    std::string name;
    GradcheckResult result;
};

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradStep = 1e-5;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double std = 1.0) {
    std::normal_distribution<double> normal(0.0, std);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

/// sum(out .* w) as a 1x1 node, built from row picks and matmuls so that the
/// reduction itself adds no new op type.
inline Var weighted_sum(Graph& g, Var out, const Matrix& w) {
    Var total = g.constant(Matrix::Zero(1, 1));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        const int idx[] = {static_cast<int>(r)};
        Var row = embedding_lookup(out, idx);
        total = add(total, matmul(row, g.constant(w.row(r)), Transpose::Yes));
    }
    return total;
}

/// 2-frame, 3-object tokenizer example used by the audit: small grid, every
/// learnable table in play, one object per slot plus a degenerate box.
struct TokenizerAuditCase {
    GoTokenizerParams params;
    std::vector<FrameFeatureMap> frames;
    std::vector<GroundedObject> objects;
    Matrix upstream;  ///< fixed weights of the scalar loss on the token matrix
};

inline TokenizerAuditCase tokenizer_audit_case(std::uint64_t seed) {
    TokenizerAuditCase c;
    const GoTokenizerConfig cfg{4, 6, 5, 2};
    c.params = GoTokenizerParams::initialized(cfg, seed);
    Rng rng = stream_for(seed, "audit.tokenizer");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int slot = 0; slot < 2; ++slot) {
        FrameFeatureMap map("audit", static_cast<std::uint32_t>(slot), cfg.n_p, cfg.d_v);
        for (auto& v : map.values()) v = static_cast<float>(normal(rng));
        c.frames.push_back(std::move(map));
    }
    c.objects = {{0, BBox{0.10, 0.20, 0.55, 0.80}, {0, 0.9}},
                 {1, BBox{0.40, 0.00, 1.00, 0.45}, {1, 0.8}},
                 {1, BBox{0.30, 0.30, 0.30, 0.30}, {2, 0.7}}};
    c.upstream = random_matrix(3, cfg.d_t, rng);
    return c;
}

/// One entry per op type, then one for the tokenizer pass.
inline std::vector<AuditEntry> run_gradient_audit(std::uint64_t seed) {
    std::vector<AuditEntry> out;
    Rng rng = stream_for(seed, "audit");
    auto check = [&](const std::string& name, const std::function<Var(Graph&)>& fn, std::vector<Parameter*> ps) {
        out.push_back({name, gradcheck(fn, ps, kGradStep)});
    };

    Parameter a{"a", random_matrix(3, 4, rng), true};
    Parameter b{"b", random_matrix(4, 5, rng), true};
    Parameter bt{"bt", random_matrix(5, 4, rng), true};
    Parameter row{"row", random_matrix(1, 4, rng), true};
    Parameter same{"same", random_matrix(3, 4, rng), true};
    const Matrix w34 = random_matrix(3, 4, rng);
    const Matrix w35 = random_matrix(3, 5, rng);

    check("matmul", [&](Graph& g) { return weighted_sum(g, matmul(g.param(a), g.param(b)), w35); }, {&a, &b});
    check("matmul_transposed",
          [&](Graph& g) { return weighted_sum(g, matmul(g.param(a), g.param(bt), Transpose::Yes), w35); }, {&a, &bt});
    check("add", [&](Graph& g) { return weighted_sum(g, add(g.param(a), g.param(same)), w34); }, {&a, &same});
    check("add_broadcast", [&](Graph& g) { return weighted_sum(g, add(g.param(a), g.param(row)), w34); }, {&a, &row});
    check("scale", [&](Graph& g) { return weighted_sum(g, scale(g.param(a), -1.7), w34); }, {&a});
    check("relu", [&](Graph& g) { return weighted_sum(g, relu(g.param(a)), w34); }, {&a});

    Parameter tall{"tall", random_matrix(6, 4, rng), true};
    const Matrix w14 = random_matrix(1, 4, rng);
    check("mean_over_index_set", [&](Graph& g) {
        const int rows[] = {0, 2, 5};
        return weighted_sum(g, mean_over_index_set(g.param(tall), rows), w14);
    }, {&tall});
    check("embedding_lookup", [&](Graph& g) {
        const int ids[] = {4, 1, 4};
        return weighted_sum(g, embedding_lookup(g.param(tall), ids), w34);
    }, {&tall});
    const Matrix w94 = random_matrix(9, 4, rng);
    check("concat_rows", [&](Graph& g) {
        const Var parts[] = {g.param(a), g.param(tall)};
        return weighted_sum(g, concat_rows(parts), w94);
    }, {&a, &tall});

    Parameter gain{"gain", random_matrix(1, 4, rng), true};
    Parameter bias{"bias", random_matrix(1, 4, rng), true};
    check("layer_norm",
          [&](Graph& g) { return weighted_sum(g, layer_norm(g.param(a), g.param(gain), g.param(bias)), w34); },
          {&a, &gain, &bias});

    Parameter q{"q", random_matrix(5, 8, rng), true};
    Parameter k{"k", random_matrix(5, 8, rng), true};
    Parameter v{"v", random_matrix(5, 8, rng), true};
    const Matrix w58 = random_matrix(5, 8, rng);
    for (bool rotary : {false, true})
        check(rotary ? "causal_self_attention_rotary" : "causal_self_attention", [&, rotary](Graph& g) {
            return weighted_sum(g, causal_self_attention(g.param(q), g.param(k), g.param(v), 2, rotary), w58);
        }, {&q, &k, &v});

    Parameter logits{"logits", random_matrix(3, 6, rng), true};
    check("softmax_cross_entropy", [&](Graph& g) {
        const int targets[] = {2, 0, 5};
        return softmax_cross_entropy(g.param(logits), targets);
    }, {&logits});

    TokenizerAuditCase tc = tokenizer_audit_case(seed);
    check("go_tokenizer", [&](Graph& g) {
        return weighted_sum(g, tokenize_objects(g, tc.params, tc.frames, tc.objects), tc.upstream);
    }, tc.params.parameters());
    return out;
}

}  // namespace gotok
