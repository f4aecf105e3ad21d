// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gotok/autodiff.hpp"

namespace gotok {

struct GradcheckResult {
    double max_rel_error = 0.0;
    std::string worst;  ///< "param[index]" of the worst entry
    std::size_t checked = 0;

    bool passed(double tolerance) const { return checked > 0 && max_rel_error < tolerance; }
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries that are zero
/// analytically from dividing round-off by round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// with step h, for every entry of each listed parameter. `loss_fn` builds a
/// fresh graph and returns its 1x1 loss; it is called 2 * entries + 1 times.
/// `max_entries_per_param` > 0 subsamples large parameters with a stride.
inline GradcheckResult gradcheck(const std::function<Var(Graph&)>& loss_fn, const std::vector<Parameter*>& params,
                                 double h = 1e-5, std::size_t max_entries_per_param = 0) {
    std::vector<Matrix> analytic;
    {
        Graph g;
        Var loss = loss_fn(g);
        g.backward(loss);
        for (Parameter* p : params) {
            const Matrix* grad = g.param_grad(*p);
            analytic.push_back(grad ? *grad : Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    auto eval = [&]() {
        Graph g;
        return loss_fn(g).value()(0, 0);
    };

    GradcheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        const auto n = static_cast<std::size_t>(p.value.size());
        std::size_t stride = 1;
        if (max_entries_per_param > 0 && n > max_entries_per_param) stride = (n + max_entries_per_param - 1) / max_entries_per_param;
        for (std::size_t i = 0; i < n; i += stride) {
            double& x = p.value.data()[i];
            const double saved = x;
            x = saved + h;
            const double up = eval();
            x = saved - h;
            const double down = eval();
            x = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double err = relative_error(analytic[pi].data()[i], numeric);
            ++result.checked;
            if (!std::isfinite(err) || err > result.max_rel_error) {
                result.max_rel_error = std::isfinite(err) ? err : INFINITY;
                result.worst = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return result;
}

}  // namespace gotok
