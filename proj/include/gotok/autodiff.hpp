// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every operation in creation order, which is already a
// topological order, so backward() is a single reverse sweep. Leaves are
// either constants (copied in) or parameters (borrowed by pointer; the graph
// must not outlive them). Gradients are only propagated into nodes whose
// requires_grad flag is set, so frozen weights cost a forward product only.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gotok/error.hpp"

namespace gotok {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// A named tensor owned by a model. Frozen parameters never receive
/// gradients and never appear in the trainable enumeration.
struct Parameter {
    std::string name;
    Matrix value;
    bool trainable = false;
};

/// Owns parameters with stable addresses, in registration order.
class ParameterRegistry {
public:
    Parameter& add(std::string name, Matrix value, bool trainable) {
        for (const auto& p : params_)
            if (p->name == name) throw ValidationError("duplicate parameter name '" + name + "'");
        params_.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(value), trainable}));
        return *params_.back();
    }

    Parameter* find(const std::string& name) const {
        for (const auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }

    Parameter& at(const std::string& name) const {
        if (auto* p = find(name)) return *p;
        throw ValidationError("no parameter named '" + name + "'");
    }

    std::vector<Parameter*> all() const {
        std::vector<Parameter*> out;
        for (const auto& p : params_) out.push_back(p.get());
        return out;
    }

    std::vector<Parameter*> trainable() const {
        std::vector<Parameter*> out;
        for (const auto& p : params_)
            if (p->trainable) out.push_back(p.get());
        return out;
    }

    std::size_t total_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
        return n;
    }

    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& p : params_)
            if (p->trainable) n += static_cast<std::size_t>(p->value.size());
        return n;
    }

    std::size_t size() const noexcept { return params_.size(); }

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
    Graph* graph = nullptr;
    int id = -1;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Matrix value) {
        Node n;
        n.value = std::move(value);
        n.op = "constant";
        return push(std::move(n));
    }

    /// Leaf bound to a parameter. Each parameter maps to a single node, so
    /// tied uses accumulate into one gradient.
    Var param(const Parameter& p) {
        if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
        Node n;
        n.borrowed = &p.value;
        n.requires_grad = p.trainable;
        n.op = "param";
        Var v = push(std::move(n));
        param_nodes_.emplace(&p, v.id);
        param_order_.push_back(&p);
        return v;
    }

    const Matrix& value(Var v) const { return node(v).val(); }
    bool requires_grad(Var v) const { return node(v).requires_grad; }

    /// Gradient of the last backward() target with respect to v; zero if no
    /// gradient reached it.
    Matrix grad(Var v) const {
        const Node& n = node(v);
        if (n.grad.size() == 0) return Matrix::Zero(n.val().rows(), n.val().cols());
        return n.grad;
    }

    /// Gradient accumulated for a parameter, or nullptr when it is not part
    /// of this graph or received nothing.
    const Matrix* param_grad(const Parameter& p) const {
        auto it = param_nodes_.find(&p);
        if (it == param_nodes_.end()) return nullptr;
        const Node& n = nodes_[static_cast<std::size_t>(it->second)];
        return n.grad.size() == 0 ? nullptr : &n.grad;
    }

    const std::vector<const Parameter*>& parameters() const noexcept { return param_order_; }

    std::size_t size() const noexcept { return nodes_.size(); }

    void backward(Var loss) {
        const Matrix& l = value(loss);
        if (l.rows() != 1 || l.cols() != 1)
            throw ValidationError("backward needs a 1x1 loss, got " + shape_str(l));
        for (auto& n : nodes_) n.grad.resize(0, 0);
        if (!node(loss).requires_grad) return;
        grad_ref(loss.id).setOnes();
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.backward && n.requires_grad && n.grad.size() != 0) n.backward(*this, id);
        }
    }

    // ---- used by op implementations ------------------------------------

    using Backward = std::function<void(Graph&, int)>;

    Var emit(Matrix value, std::initializer_list<Var> inputs, const char* op, Backward bw) {
        Node n;
        n.value = std::move(value);
        n.op = op;
        for (Var in : inputs) n.requires_grad = n.requires_grad || requires_grad(in);
        if (n.requires_grad) n.backward = std::move(bw);
        return push(std::move(n));
    }

    Var emit(Matrix value, std::span<const Var> inputs, const char* op, Backward bw) {
        Node n;
        n.value = std::move(value);
        n.op = op;
        for (Var in : inputs) n.requires_grad = n.requires_grad || requires_grad(in);
        if (n.requires_grad) n.backward = std::move(bw);
        return push(std::move(n));
    }

    const Matrix& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    const Matrix& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].val(); }
    bool requires_grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    /// Zero-initialized on first touch.
    Matrix& grad_ref(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) n.grad = Matrix::Zero(n.val().rows(), n.val().cols());
        return n.grad;
    }

private:
    struct Node {
        Matrix value;
        const Matrix* borrowed = nullptr;
        Matrix grad;
        bool requires_grad = false;
        const char* op = "";
        Backward backward;

        const Matrix& val() const { return borrowed ? *borrowed : value; }
    };

    Var push(Node n) {
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    const Node& node(Var v) const {
        if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
            throw ValidationError("variable does not belong to this graph");
        return nodes_[static_cast<std::size_t>(v.id)];
    }

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> param_nodes_;
    std::vector<const Parameter*> param_order_;
};

inline const Matrix& Var::value() const { return graph->value(*this); }

// ===========================================================================
// Operations
// ===========================================================================

namespace detail {
inline Graph& same_graph(Var a, Var b) {
    if (a.graph == nullptr || a.graph != b.graph) throw ValidationError("operands belong to different graphs");
    return *a.graph;
}
}  // namespace detail

enum class Transpose { No, Yes };

/// a * b, or a * b^T.
inline Var matmul(Var a, Var b, Transpose tb = Transpose::No) {
    Graph& g = detail::same_graph(a, b);
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    const bool t = tb == Transpose::Yes;
    const auto inner_b = t ? B.cols() : B.rows();
    if (A.cols() != inner_b)
        throw ValidationError("matmul: shape mismatch " + shape_str(A) + " x " + shape_str(B) + (t ? "^T" : ""));
    Matrix out;
    if (t)
        out.noalias() = A * B.transpose();
    else
        out.noalias() = A * B;
    const int ia = a.id, ib = b.id;
    return g.emit(std::move(out), {a, b}, "matmul", [ia, ib, t](Graph& gr, int self) {
        const Matrix& dC = gr.grad_of(self);
        const Matrix& A = gr.value_of(ia);
        const Matrix& B = gr.value_of(ib);
        if (gr.requires_grad_of(ia)) {
            if (t)
                gr.grad_ref(ia).noalias() += dC * B;
            else
                gr.grad_ref(ia).noalias() += dC * B.transpose();
        }
        if (gr.requires_grad_of(ib)) {
            if (t)
                gr.grad_ref(ib).noalias() += dC.transpose() * A;
            else
                gr.grad_ref(ib).noalias() += A.transpose() * dC;
        }
    });
}

/// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
inline Var add(Var a, Var b) {
    Graph& g = detail::same_graph(a, b);
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    const bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
    if (!broadcast && (A.rows() != B.rows() || A.cols() != B.cols()))
        throw ValidationError("add: shape mismatch " + shape_str(A) + " + " + shape_str(B));
    Matrix out = A;
    if (broadcast)
        out.rowwise() += B.row(0);
    else
        out += B;
    const int ia = a.id, ib = b.id;
    return g.emit(std::move(out), {a, b}, "add", [ia, ib, broadcast](Graph& gr, int self) {
        const Matrix& dC = gr.grad_of(self);
        if (gr.requires_grad_of(ia)) gr.grad_ref(ia) += dC;
        if (gr.requires_grad_of(ib)) {
            if (broadcast)
                gr.grad_ref(ib).row(0) += dC.colwise().sum();
            else
                gr.grad_ref(ib) += dC;
        }
    });
}

inline Var scale(Var a, double s) {
    Graph& g = *a.graph;
    const int ia = a.id;
    return g.emit(a.value() * s, {a}, "scale", [ia, s](Graph& gr, int self) {
        gr.grad_ref(ia) += gr.grad_of(self) * s;
    });
}

inline Var relu(Var a) {
    Graph& g = *a.graph;
    const int ia = a.id;
    return g.emit(a.value().cwiseMax(0.0), {a}, "relu", [ia](Graph& gr, int self) {
        const Matrix& x = gr.value_of(ia);
        gr.grad_ref(ia) += (x.array() > 0.0).select(gr.grad_of(self), 0.0);
    });
}

/// Mean of the selected rows, as a single row. Duplicate indices are rejected.
inline Var mean_over_index_set(Var a, std::span<const int> rows) {
    Graph& g = *a.graph;
    const Matrix& A = a.value();
    if (rows.empty()) throw ValidationError("mean_over_index_set: empty index set");
    std::vector<int> idx(rows.begin(), rows.end());
    {
        std::vector<int> sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ValidationError("mean_over_index_set: duplicate index");
    }
    Matrix out = Matrix::Zero(1, A.cols());
    for (int r : idx) {
        if (r < 0 || r >= A.rows())
            throw ValidationError("mean_over_index_set: row " + std::to_string(r) + " outside " + shape_str(A));
        out.row(0) += A.row(r);
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    out *= inv;
    const int ia = a.id;
    return g.emit(std::move(out), {a}, "mean_over_index_set", [ia, idx = std::move(idx), inv](Graph& gr, int self) {
        const Matrix& dC = gr.grad_of(self);
        Matrix& dA = gr.grad_ref(ia);
        for (int r : idx) dA.row(r) += dC.row(0) * inv;
    });
}

/// Gathers rows of `table`. Repeated ids scatter-add on backward.
inline Var embedding_lookup(Var table, std::span<const int> ids) {
    Graph& g = *table.graph;
    const Matrix& T = table.value();
    Matrix out(static_cast<Eigen::Index>(ids.size()), T.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= T.rows())
            throw ValidationError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table " + shape_str(T));
        out.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
    }
    const int it = table.id;
    return g.emit(std::move(out), {table}, "embedding_lookup",
                  [it, idv = std::vector<int>(ids.begin(), ids.end())](Graph& gr, int self) {
                      const Matrix& dC = gr.grad_of(self);
                      Matrix& dT = gr.grad_ref(it);
                      for (std::size_t i = 0; i < idv.size(); ++i) dT.row(idv[i]) += dC.row(static_cast<Eigen::Index>(i));
                  });
}

/// Stacks the parts vertically. Parts with zero rows are allowed.
inline Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ValidationError("concat_rows: no parts");
    Graph& g = *parts.front().graph;
    const auto cols = parts.front().cols();
    Eigen::Index total = 0;
    for (Var p : parts) {
        if (p.graph != &g) throw ValidationError("concat_rows: operands belong to different graphs");
        if (p.cols() != cols)
            throw ValidationError("concat_rows: width mismatch " + shape_str(p.value()) + " vs " + std::to_string(cols));
        total += p.rows();
    }
    Matrix out(total, cols);
    std::vector<std::pair<int, Eigen::Index>> spans;
    Eigen::Index offset = 0;
    for (Var p : parts) {
        if (p.rows() > 0) out.middleRows(offset, p.rows()) = p.value();
        spans.emplace_back(p.id, offset);
        offset += p.rows();
    }
    return g.emit(std::move(out), parts, "concat_rows", [spans = std::move(spans)](Graph& gr, int self) {
        const Matrix& dC = gr.grad_of(self);
        for (auto [id, off] : spans) {
            if (!gr.requires_grad_of(id)) continue;
            const auto n = gr.value_of(id).rows();
            if (n > 0) gr.grad_ref(id) += dC.middleRows(off, n);
        }
    });
}

/// Row-wise normalization with affine gain/bias (each 1 x n).
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    Graph& g = detail::same_graph(x, gain);
    detail::same_graph(x, bias);
    const Matrix& X = x.value();
    const auto n = X.cols();
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
        throw ValidationError("layer_norm: gain/bias must be 1x" + std::to_string(n) + ", got " +
                              shape_str(gain.value()) + " and " + shape_str(bias.value()));
    Matrix xhat(X.rows(), n);
    Eigen::VectorXd inv_std(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double mu = X.row(r).mean();
        const double var = (X.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
    }
    Matrix out = xhat;
    out.array().rowwise() *= gain.value().row(0).array();
    out.rowwise() += bias.value().row(0);
    const int ix = x.id, ig = gain.id, ib = bias.id;
    return g.emit(std::move(out), {x, gain, bias}, "layer_norm",
                  [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, int self) {
                      const Matrix& dY = gr.grad_of(self);
                      const Matrix& G = gr.value_of(ig);
                      if (gr.requires_grad_of(ig)) gr.grad_ref(ig).row(0) += (dY.array() * xhat.array()).colwise().sum().matrix();
                      if (gr.requires_grad_of(ib)) gr.grad_ref(ib).row(0) += dY.colwise().sum();
                      if (gr.requires_grad_of(ix)) {
                          Matrix& dX = gr.grad_ref(ix);
                          const double n = static_cast<double>(dY.cols());
                          for (Eigen::Index r = 0; r < dY.rows(); ++r) {
                              RowVector dxhat = (dY.row(r).array() * G.row(0).array()).matrix();
                              const double m1 = dxhat.mean();
                              const double m2 = (dxhat.array() * xhat.row(r).array()).sum() / n;
                              dX.row(r).array() += inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2);
                          }
                      }
                  });
}

namespace detail {

/// cos/sin of the rotary angle t * 10000^(-i/dh) for even i, one row per
/// position; cached per thread and grown on demand.
struct RotaryTable {
    Eigen::Index dh = 0;
    Matrix cos, sin;  ///< T x dh/2
};

inline const RotaryTable& rotary_table(Eigen::Index T, Eigen::Index dh) {
    thread_local RotaryTable table;
    if (table.dh != dh || table.cos.rows() < T) {
        const Eigen::Index rows = std::max<Eigen::Index>(T, table.dh == dh ? 2 * table.cos.rows() : T);
        table.dh = dh;
        table.cos.resize(rows, dh / 2);
        table.sin.resize(rows, dh / 2);
        for (Eigen::Index t = 0; t < rows; ++t)
            for (Eigen::Index i = 0; i + 1 < dh; i += 2) {
                const double theta = static_cast<double>(t) * std::pow(10000.0, -static_cast<double>(i) / dh);
                table.cos(t, i / 2) = std::cos(theta);
                table.sin(t, i / 2) = std::sin(theta);
            }
    }
    return table;
}

/// In-place rotary position rotation of every head of X (T x d). With
/// inverse=true applies the transpose, which is the adjoint.
inline void apply_rotary(Matrix& X, int n_heads, bool inverse) {
    const auto T = X.rows();
    const auto d = X.cols();
    const auto dh = d / n_heads;
    const RotaryTable& tab = rotary_table(T, dh);
    const double sign = inverse ? -1.0 : 1.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        double* row = X.data() + t * d;
        for (Eigen::Index h = 0; h < n_heads; ++h) {
            double* head = row + h * dh;
            for (Eigen::Index i = 0; i + 1 < dh; i += 2) {
                const double c = tab.cos(t, i / 2);
                const double s = sign * tab.sin(t, i / 2);
                const double a0 = head[i], b0 = head[i + 1];
                head[i] = a0 * c - b0 * s;
                head[i + 1] = a0 * s + b0 * c;
            }
        }
    }
}

}  // namespace detail

/// Multi-head causal scaled-dot-product attention over already projected
/// queries/keys/values (each T x d). With `rotary`, queries and keys are
/// rotated by their position before scoring.
inline Var causal_self_attention(Var q, Var k, Var v, int n_heads, bool rotary = true) {
    Graph& g = detail::same_graph(q, k);
    detail::same_graph(q, v);
    const Matrix& Q0 = q.value();
    const Matrix& K0 = k.value();
    const Matrix& V = v.value();
    if (Q0.rows() != K0.rows() || Q0.rows() != V.rows() || Q0.cols() != K0.cols() || Q0.cols() != V.cols())
        throw ValidationError("causal_self_attention: shape mismatch q " + shape_str(Q0) + ", k " + shape_str(K0) +
                              ", v " + shape_str(V));
    if (n_heads < 1 || Q0.cols() % n_heads != 0)
        throw ValidationError("causal_self_attention: width " + std::to_string(Q0.cols()) +
                              " not divisible by heads " + std::to_string(n_heads));
    const auto T = Q0.rows();
    const auto dh = Q0.cols() / n_heads;
    const double scale_f = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix Q = Q0, K = K0;
    if (rotary) {
        detail::apply_rotary(Q, n_heads, false);
        detail::apply_rotary(K, n_heads, false);
    }
    std::vector<Matrix> probs(static_cast<std::size_t>(n_heads));
    Matrix out(T, Q0.cols());
    for (int h = 0; h < n_heads; ++h) {
        Matrix S = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * scale_f;
        for (Eigen::Index i = 0; i < T; ++i) {
            const double mx = S.row(i).head(i + 1).maxCoeff();
            double z = 0.0;
            for (Eigen::Index j = 0; j <= i; ++j) {
                S(i, j) = std::exp(S(i, j) - mx);
                z += S(i, j);
            }
            S.row(i).head(i + 1) /= z;
            if (i + 1 < T) S.row(i).tail(T - i - 1).setZero();
        }
        out.middleCols(h * dh, dh).noalias() = S * V.middleCols(h * dh, dh);
        probs[static_cast<std::size_t>(h)] = std::move(S);
    }
    const int iq = q.id, ik = k.id, iv = v.id;
    return g.emit(std::move(out), {q, k, v}, "causal_self_attention",
                  [iq, ik, iv, n_heads, dh, scale_f, rotary, Q = std::move(Q), K = std::move(K),
                   probs = std::move(probs)](Graph& gr, int self) {
                      const Matrix& dO = gr.grad_of(self);
                      const Matrix& V = gr.value_of(iv);
                      const auto T = dO.rows();
                      Matrix dQ = Matrix::Zero(T, dO.cols());
                      Matrix dK = Matrix::Zero(T, dO.cols());
                      Matrix dV = Matrix::Zero(T, dO.cols());
                      for (int h = 0; h < n_heads; ++h) {
                          const Matrix& P = probs[static_cast<std::size_t>(h)];
                          const auto dOh = dO.middleCols(h * dh, dh);
                          dV.middleCols(h * dh, dh).noalias() += P.transpose() * dOh;
                          Matrix dP = dOh * V.middleCols(h * dh, dh).transpose();
                          Eigen::VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
                          Matrix dS = P.array() * (dP.colwise() - rowdot).array();
                          dS *= scale_f;
                          dQ.middleCols(h * dh, dh).noalias() += dS * K.middleCols(h * dh, dh);
                          dK.middleCols(h * dh, dh).noalias() += dS.transpose() * Q.middleCols(h * dh, dh);
                      }
                      if (rotary) {
                          detail::apply_rotary(dQ, n_heads, true);
                          detail::apply_rotary(dK, n_heads, true);
                      }
                      if (gr.requires_grad_of(iq)) gr.grad_ref(iq) += dQ;
                      if (gr.requires_grad_of(ik)) gr.grad_ref(ik) += dK;
                      if (gr.requires_grad_of(iv)) gr.grad_ref(iv) += dV;
                  });
}

/// Mean over rows of -log softmax(logits)[target]. Result is 1x1.
inline Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
    Graph& g = *logits.graph;
    const Matrix& L = logits.value();
    if (static_cast<Eigen::Index>(targets.size()) != L.rows())
        throw ValidationError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                              shape_str(L));
    if (L.rows() == 0) throw ValidationError("softmax_cross_entropy: no rows");
    Matrix P(L.rows(), L.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
        const int t = targets[static_cast<std::size_t>(r)];
        if (t < 0 || t >= L.cols())
            throw ValidationError("softmax_cross_entropy: target " + std::to_string(t) + " outside " +
                                  std::to_string(L.cols()) + " classes");
        const double mx = L.row(r).maxCoeff();
        P.row(r) = (L.row(r).array() - mx).exp().matrix();
        const double z = P.row(r).sum();
        P.row(r) /= z;
        loss += -(L(r, t) - mx - std::log(z));
    }
    const double inv_n = 1.0 / static_cast<double>(L.rows());
    Matrix out(1, 1);
    out(0, 0) = loss * inv_n;
    const int il = logits.id;
    return g.emit(std::move(out), {logits}, "softmax_cross_entropy",
                  [il, inv_n, P = std::move(P), tv = std::vector<int>(targets.begin(), targets.end())](Graph& gr,
                                                                                                       int self) {
                      const double up = gr.grad_of(self)(0, 0);
                      Matrix d = P;
                      for (std::size_t r = 0; r < tv.size(); ++r) d(static_cast<Eigen::Index>(r), tv[r]) -= 1.0;
                      gr.grad_ref(il) += d * (up * inv_n);
                  });
}

}  // namespace gotok
