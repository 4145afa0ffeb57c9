#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ivae/matrix.hpp"
#include "ivae/params.hpp"

namespace ivae {

// Numerically stable logistic; exact at 0 and monotone saturating.
template <typename T>
inline T logistic_scalar(T u) {
    if (u >= T(0)) {
        return T(1) / (T(1) + std::exp(-u));
    }
    const T e = std::exp(u);
    return e / (T(1) + e);
}

template <typename T>
inline T silu_scalar(T u) {
    return u * logistic_scalar(u);
}

// silu'(u) = s(u)(1 + u(1 - s(u)))
template <typename T>
inline T silu_d_scalar(T u) {
    const T s = logistic_scalar(u);
    return s * (T(1) + u * (T(1) - s));
}

// silu''(u) = s(u)(1 - s(u))(2 + u(1 - 2 s(u))); smooth everywhere, which is
// what lets the energy model train on a gradient of a gradient.
template <typename T>
inline T silu_dd_scalar(T u) {
    const T s = logistic_scalar(u);
    return s * (T(1) - s) * (T(2) + u * (T(1) - T(2) * s));
}

// Reverse-mode tape over matrix primitives. Records each op with its saved
// values during the forward pass; backward() walks the record once, in exact
// reverse order, accumulating gradients with a fixed deterministic order.
// A tape can be backpropagated once (TapeConsumed otherwise).
template <typename T>
class Tape {
  public:
    using Id = int;

    enum class Op : std::uint8_t {
        constant,     // no inputs, no grad
        leaf,         // input that may want a gradient
        param,        // leaf bound to a ParamStore entry
        matmul,       // a (n×k) · b (k×m)
        add_rowvec,   // a + broadcast of b (1×m)
        add,
        sub,
        mul,          // elementwise
        scale,        // s0 * a
        affine_const, // s0 * a + s1
        silu,
        silu_prime,   // silu'(a); backward needs silu''
        logistic,
        exp,
        abs,
        bce_logits,   // elementwise stable BCE of logits a against constant targets b
        sum,          // 1×1 total
        slice_cols,   // a[:, c0:c1)
    };

    Id constant(Matrix<T> m) { return push_(Op::constant, -1, -1, std::move(m), false); }

    Id leaf(Matrix<T> m, bool needs_grad) { return push_(Op::leaf, -1, -1, std::move(m), needs_grad); }

    Id param(ParamStore<T>& store, int param_index) {
        Id id = push_(Op::param, -1, -1, store.value(param_index), true);
        nodes_[id].store = &store;
        nodes_[id].param_index = param_index;
        return id;
    }

    Id param(ParamStore<T>& store, const std::string& name) { return param(store, store.index_of(name)); }

    Id matmul(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.cols != bv.rows) throw ShapeMismatch("tape matmul: inner dims disagree");
        Matrix<T> out(av.rows, bv.cols);
        gemm_nn_acc(out, av, bv);
        return push_(Op::matmul, a, b, std::move(out), wants_(a) || wants_(b));
    }

    Id add_rowvec(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (bv.rows != 1 || bv.cols != av.cols) throw ShapeMismatch("tape add_rowvec: bias must be 1×cols");
        Matrix<T> out = av;
        for (int i = 0; i < out.rows; ++i) {
            T* r = out.row(i);
            for (int j = 0; j < out.cols; ++j) r[j] += bv.v[j];
        }
        return push_(Op::add_rowvec, a, b, std::move(out), wants_(a) || wants_(b));
    }

    Id add(Id a, Id b) { return ew2_(Op::add, a, b); }
    Id sub(Id a, Id b) { return ew2_(Op::sub, a, b); }
    Id mul(Id a, Id b) { return ew2_(Op::mul, a, b); }

    Id scale(Id a, double s) {
        Matrix<T> out = val(a);
        const T ss = static_cast<T>(s);
        for (auto& x : out.v) x *= ss;
        Id id = push_(Op::scale, a, -1, std::move(out), wants_(a));
        nodes_[id].s0 = s;
        return id;
    }

    Id affine_const(Id a, double s, double t) {
        Matrix<T> out = val(a);
        const T ss = static_cast<T>(s), tt = static_cast<T>(t);
        for (auto& x : out.v) x = ss * x + tt;
        Id id = push_(Op::affine_const, a, -1, std::move(out), wants_(a));
        nodes_[id].s0 = s;
        nodes_[id].s1 = t;
        return id;
    }

    Id silu(Id a) { return ew1_(Op::silu, a, [](T u) { return silu_scalar(u); }); }
    Id silu_prime(Id a) { return ew1_(Op::silu_prime, a, [](T u) { return silu_d_scalar(u); }); }
    Id logistic(Id a) { return ew1_(Op::logistic, a, [](T u) { return logistic_scalar(u); }); }
    Id exp(Id a) { return ew1_(Op::exp, a, [](T u) { return std::exp(u); }); }
    Id abs(Id a) { return ew1_(Op::abs, a, [](T u) { return std::abs(u); }); }

    // max(u,0) - u*x + log1p(exp(-|u|)), elementwise; targets are constants.
    Id bce_logits(Id logits, Id targets) {
        const auto& u = val(logits);
        const auto& x = val(targets);
        require_same_shape(u, x, "tape bce_logits");
        Matrix<T> out(u.rows, u.cols);
        for (std::size_t k = 0; k < u.size(); ++k) {
            const T uk = u.v[k];
            const T pos = uk > T(0) ? uk : T(0);
            out.v[k] = pos - uk * x.v[k] + std::log1p(std::exp(-std::abs(uk)));
        }
        return push_(Op::bce_logits, logits, targets, std::move(out), wants_(logits));
    }

    Id sum(Id a) {
        const auto& av = val(a);
        Matrix<T> out(1, 1);
        T acc = T(0);
        for (const auto& x : av.v) acc += x;
        out.v[0] = acc;
        return push_(Op::sum, a, -1, std::move(out), wants_(a));
    }

    Id slice_cols(Id a, int c0, int c1) {
        const auto& av = val(a);
        if (c0 < 0 || c1 > av.cols || c0 >= c1) throw ShapeMismatch("tape slice_cols: bad column range");
        Matrix<T> out(av.rows, c1 - c0);
        for (int i = 0; i < av.rows; ++i) {
            const T* src = av.row(i);
            T* dst = out.row(i);
            for (int j = c0; j < c1; ++j) dst[j - c0] = src[j];
        }
        Id id = push_(Op::slice_cols, a, -1, std::move(out), wants_(a));
        nodes_[id].c0 = c0;
        nodes_[id].c1 = c1;
        return id;
    }

    const Matrix<T>& val(Id id) const { return nodes_[id].value; }

    // Zero matrix when the node never received a gradient.
    Matrix<T> grad(Id id) const {
        const auto& n = nodes_[id];
        if (n.grad.rows == 0) return Matrix<T>(n.value.rows, n.value.cols);
        return n.grad;
    }

    // Seeds d(root)=1 (root must be 1×1) and accumulates into every node
    // that wants a gradient. Visits ops in exact reverse recording order.
    void backward(Id root) {
        const auto& rv = val(root);
        if (rv.rows != 1 || rv.cols != 1) throw ShapeMismatch("tape backward: root must be scalar; pass a seed otherwise");
        Matrix<T> seed(1, 1);
        seed.v[0] = T(1);
        backward(root, seed);
    }

    void backward(Id root, const Matrix<T>& seed) {
        if (consumed_) throw TapeConsumed("tape backward: tape already backpropagated");
        consumed_ = true;
        require_same_shape(val(root), seed, "tape backward seed");
        touch_grad_(root) = seed;
        for (Id id = root; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.needs_grad || n.grad.rows == 0) continue;
            const Matrix<T>& g = n.grad;
            switch (n.op) {
                case Op::constant:
                case Op::leaf:
                case Op::param:
                    break;
                case Op::matmul: {
                    if (wants_(n.a)) gemm_nt_acc(touch_grad_(n.a), g, nodes_[n.b].value);
                    if (wants_(n.b)) gemm_tn_acc(touch_grad_(n.b), nodes_[n.a].value, g);
                    break;
                }
                case Op::add_rowvec: {
                    if (wants_(n.a)) acc_(touch_grad_(n.a), g, T(1));
                    if (wants_(n.b)) {
                        Matrix<T>& gb = touch_grad_(n.b);
                        for (int i = 0; i < g.rows; ++i) {
                            const T* gi = g.row(i);
                            for (int j = 0; j < g.cols; ++j) gb.v[j] += gi[j];
                        }
                    }
                    break;
                }
                case Op::add:
                    if (wants_(n.a)) acc_(touch_grad_(n.a), g, T(1));
                    if (wants_(n.b)) acc_(touch_grad_(n.b), g, T(1));
                    break;
                case Op::sub:
                    if (wants_(n.a)) acc_(touch_grad_(n.a), g, T(1));
                    if (wants_(n.b)) acc_(touch_grad_(n.b), g, T(-1));
                    break;
                case Op::mul:
                    if (wants_(n.a)) acc_mul_(touch_grad_(n.a), g, nodes_[n.b].value);
                    if (wants_(n.b)) acc_mul_(touch_grad_(n.b), g, nodes_[n.a].value);
                    break;
                case Op::scale:
                    if (wants_(n.a)) acc_(touch_grad_(n.a), g, static_cast<T>(n.s0));
                    break;
                case Op::affine_const:
                    if (wants_(n.a)) acc_(touch_grad_(n.a), g, static_cast<T>(n.s0));
                    break;
                case Op::silu:
                    if (wants_(n.a)) acc_fn_(touch_grad_(n.a), g, nodes_[n.a].value, [](T u) { return silu_d_scalar(u); });
                    break;
                case Op::silu_prime:
                    if (wants_(n.a)) acc_fn_(touch_grad_(n.a), g, nodes_[n.a].value, [](T u) { return silu_dd_scalar(u); });
                    break;
                case Op::logistic:
                    if (wants_(n.a)) {
                        Matrix<T>& ga = touch_grad_(n.a);
                        for (std::size_t k = 0; k < g.size(); ++k) {
                            const T s = n.value.v[k];
                            ga.v[k] += g.v[k] * s * (T(1) - s);
                        }
                    }
                    break;
                case Op::exp:
                    if (wants_(n.a)) {
                        Matrix<T>& ga = touch_grad_(n.a);
                        for (std::size_t k = 0; k < g.size(); ++k) ga.v[k] += g.v[k] * n.value.v[k];
                    }
                    break;
                case Op::abs:
                    if (wants_(n.a)) {
                        Matrix<T>& ga = touch_grad_(n.a);
                        const Matrix<T>& a = nodes_[n.a].value;
                        for (std::size_t k = 0; k < g.size(); ++k) {
                            const T s = a.v[k] > T(0) ? T(1) : (a.v[k] < T(0) ? T(-1) : T(0));
                            ga.v[k] += g.v[k] * s;
                        }
                    }
                    break;
                case Op::bce_logits:
                    if (wants_(n.a)) {
                        Matrix<T>& ga = touch_grad_(n.a);
                        const Matrix<T>& u = nodes_[n.a].value;
                        const Matrix<T>& x = nodes_[n.b].value;
                        for (std::size_t k = 0; k < g.size(); ++k) {
                            ga.v[k] += g.v[k] * (logistic_scalar(u.v[k]) - x.v[k]);
                        }
                    }
                    break;
                case Op::sum:
                    if (wants_(n.a)) {
                        Matrix<T>& ga = touch_grad_(n.a);
                        const T s = g.v[0];
                        for (auto& x : ga.v) x += s;
                    }
                    break;
                case Op::slice_cols:
                    if (wants_(n.a)) {
                        Matrix<T>& ga = touch_grad_(n.a);
                        for (int i = 0; i < g.rows; ++i) {
                            const T* gi = g.row(i);
                            T* gai = ga.row(i);
                            for (int j = 0; j < g.cols; ++j) gai[j + n.c0] += gi[j];
                        }
                    }
                    break;
            }
        }
    }

    // Scatter accumulated param-leaf gradients into their stores (adds on
    // top of whatever the stores hold; callers zero_grads() per step).
    void add_param_grads() {
        for (const Node& n : nodes_) {
            if (n.op != Op::param || n.grad.rows == 0) continue;
            Matrix<T>& dst = n.store->grad(n.param_index);
            for (std::size_t k = 0; k < dst.size(); ++k) dst.v[k] += n.grad.v[k];
        }
    }

    bool consumed() const { return consumed_; }

  private:
    struct Node {
        Op op;
        Id a = -1, b = -1;
        Matrix<T> value;
        Matrix<T> grad;  // rows==0 until first touched
        bool needs_grad = false;
        double s0 = 0.0, s1 = 0.0;
        int c0 = 0, c1 = 0;
        ParamStore<T>* store = nullptr;
        int param_index = -1;
    };

    bool wants_(Id id) const { return id >= 0 && nodes_[id].needs_grad; }

    Matrix<T>& touch_grad_(Id id) {
        Node& n = nodes_[id];
        if (n.grad.rows == 0) n.grad = Matrix<T>(n.value.rows, n.value.cols);
        return n.grad;
    }

    Id push_(Op op, Id a, Id b, Matrix<T> value, bool needs_grad) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    Id ew2_(Op op, Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        require_same_shape(av, bv, "tape elementwise");
        Matrix<T> out(av.rows, av.cols);
        for (std::size_t k = 0; k < av.size(); ++k) {
            switch (op) {
                case Op::add: out.v[k] = av.v[k] + bv.v[k]; break;
                case Op::sub: out.v[k] = av.v[k] - bv.v[k]; break;
                default: out.v[k] = av.v[k] * bv.v[k]; break;
            }
        }
        return push_(op, a, b, std::move(out), wants_(a) || wants_(b));
    }

    template <typename F>
    Id ew1_(Op op, Id a, F f) {
        Matrix<T> out = val(a);
        for (auto& x : out.v) x = f(x);
        return push_(op, a, -1, std::move(out), wants_(a));
    }

    static void acc_(Matrix<T>& dst, const Matrix<T>& g, T s) {
        for (std::size_t k = 0; k < dst.size(); ++k) dst.v[k] += s * g.v[k];
    }

    static void acc_mul_(Matrix<T>& dst, const Matrix<T>& g, const Matrix<T>& other) {
        for (std::size_t k = 0; k < dst.size(); ++k) dst.v[k] += g.v[k] * other.v[k];
    }

    template <typename F>
    static void acc_fn_(Matrix<T>& dst, const Matrix<T>& g, const Matrix<T>& in, F df) {
        for (std::size_t k = 0; k < dst.size(); ++k) dst.v[k] += g.v[k] * df(in.v[k]);
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace ivae
