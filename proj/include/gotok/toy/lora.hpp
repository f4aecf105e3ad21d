// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "gotok/autodiff.hpp"
#include "gotok/random.hpp"

namespace gotok::toy {

struct LoraConfig {
    int rank = 8;
    double alpha = 16.0;

    double scaling() const { return alpha / rank; }
};

/// Frozen linear map W (d_out x d_in, y = x W^T) plus a trainable low-rank
/// update: W_eff = W + (alpha / r) B A with A (r x d_in) and B (d_out x r).
/// B starts at zero, so a fresh adapter reproduces the base map exactly.
class LoraLinear {
public:
    LoraLinear(ParameterRegistry& reg, const std::string& name, Parameter& base, const LoraConfig& cfg, Rng& rng)
        : base_(&base), scaling_(cfg.scaling()) {
        const auto d_out = base.value.rows();
        const auto d_in = base.value.cols();
        if (cfg.rank < 1 || cfg.rank > std::min(d_out, d_in))
            throw ValidationError("LoRA rank " + std::to_string(cfg.rank) + " must lie in [1, min(" +
                                  std::to_string(d_out) + ", " + std::to_string(d_in) + ")]");
        base.trainable = false;
        Matrix a(cfg.rank, d_in);
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
        a_ = &reg.add(name + ".lora_a", std::move(a), true);
        b_ = &reg.add(name + ".lora_b", Matrix::Zero(d_out, cfg.rank), true);
    }

    Var forward(Graph& g, Var x) const {
        Var y = matmul(x, g.param(*base_), Transpose::Yes);
        Var low = matmul(matmul(x, g.param(*a_), Transpose::Yes), g.param(*b_), Transpose::Yes);
        return add(y, scale(low, scaling_));
    }

    Matrix effective_weight() const { return base_->value + scaling_ * (b_->value * a_->value); }

    const Parameter& base() const { return *base_; }
    Parameter& a() { return *a_; }
    Parameter& b() { return *b_; }
    const Parameter& a() const { return *a_; }
    const Parameter& b() const { return *b_; }
    double scaling() const noexcept { return scaling_; }

    std::size_t trainable_count() const { return static_cast<std::size_t>(a_->value.size() + b_->value.size()); }

private:
    Parameter* base_;
    Parameter* a_;
    Parameter* b_;
    double scaling_;
};

}  // namespace gotok::toy
