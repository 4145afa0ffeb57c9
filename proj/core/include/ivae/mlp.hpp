#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ivae/tape.hpp"

namespace ivae {

// Dense SiLU stack: affine -> SiLU per hidden layer, affine readout.
// widths holds every layer width including input and output, so a net with
// widths {784, 512, 10} has one hidden layer. Parameters are named
// "<prefix>.W<k>" (in×out) and "<prefix>.b<k>" (1×out).
struct MlpRef {
    std::string prefix;
    std::vector<int> widths;

    int layer_count() const { return static_cast<int>(widths.size()) - 1; }
    std::string w_name(int k) const { return prefix + ".W" + std::to_string(k); }
    std::string b_name(int k) const { return prefix + ".b" + std::to_string(k); }
};

template <typename T>
void init_mlp(ParamStore<T>& store, const MlpRef& net, RngStream& stream) {
    for (int k = 0; k < net.layer_count(); ++k) {
        store.add(net.w_name(k), he_weight<T>(net.widths[k], net.widths[k + 1], stream));
        store.add(net.b_name(k), Matrix<T>(1, net.widths[k + 1]));
    }
}

// Builds the stack on an existing tape and returns the readout node
// (affine, no nonlinearity; callers apply logistic or keep it raw).
template <typename T>
typename Tape<T>::Id mlp_forward_tape(Tape<T>& tape, ParamStore<T>& store, const MlpRef& net,
                                      typename Tape<T>::Id input) {
    if (tape.val(input).cols != net.widths.front()) {
        throw ShapeMismatch(net.prefix + ": input width " + std::to_string(tape.val(input).cols) +
                            ", expected " + std::to_string(net.widths.front()));
    }
    auto a = input;
    for (int k = 0; k < net.layer_count(); ++k) {
        auto w = tape.param(store, net.w_name(k));
        auto b = tape.param(store, net.b_name(k));
        a = tape.add_rowvec(tape.matmul(a, w), b);
        if (k + 1 < net.layer_count()) a = tape.silu(a);
    }
    return a;
}

// A recorded forward pass: keeps the tape alive so backward() can run once.
template <typename T>
struct MlpRun {
    Tape<T> tape;
    typename Tape<T>::Id input = -1;
    typename Tape<T>::Id output = -1;
};

template <typename T>
std::pair<Matrix<T>, MlpRun<T>> mlp_forward(ParamStore<T>& store, const MlpRef& net, const Matrix<T>& input,
                                            bool track_input_grad = false) {
    MlpRun<T> run;
    run.input = run.tape.leaf(input, track_input_grad);
    run.output = mlp_forward_tape(run.tape, store, net, run.input);
    return {run.tape.val(run.output), std::move(run)};
}

// Reverse pass for a recorded forward. Accumulates parameter gradients into
// the store and returns the gradient w.r.t. the input batch.
template <typename T>
Matrix<T> backward(MlpRun<T>& run, const Matrix<T>& output_grad) {
    run.tape.backward(run.output, output_grad);
    run.tape.add_param_grads();
    return run.tape.grad(run.input);
}

// Plain forward with no recording; shares the tape's kernels (gemm + the
// same scalar SiLU), so values agree bit-for-bit with the taped path.
template <typename T>
Matrix<T> mlp_eval(const ParamStore<T>& store, const MlpRef& net, const Matrix<T>& input) {
    if (input.cols != net.widths.front()) {
        throw ShapeMismatch(net.prefix + ": input width " + std::to_string(input.cols) + ", expected " +
                            std::to_string(net.widths.front()));
    }
    Matrix<T> a = input;
    for (int k = 0; k < net.layer_count(); ++k) {
        const auto& w = store.value(net.w_name(k));
        const auto& b = store.value(net.b_name(k));
        Matrix<T> z(a.rows, w.cols);
        gemm_nn_acc(z, a, w);
        for (int i = 0; i < z.rows; ++i) {
            T* r = z.row(i);
            for (int j = 0; j < z.cols; ++j) r[j] += b.v[j];
        }
        if (k + 1 < net.layer_count()) {
            for (auto& x : z.v) x = silu_scalar(x);
        }
        a = std::move(z);
    }
    return a;
}

// Input gradient of a scalar-per-example net: rows of the result are
// grad_y f(y_i). The net must have output width 1.
template <typename T>
Matrix<T> mlp_input_gradient(ParamStore<T>& store, const MlpRef& net, const Matrix<T>& y) {
    if (net.widths.back() != 1) throw ShapeMismatch(net.prefix + ": input gradient needs scalar output");
    auto [out, run] = mlp_forward(store, net, y, /*track_input_grad=*/true);
    run.tape.backward(run.tape.sum(run.output));
    return run.tape.grad(run.input);
}

// Forward pass carrying a tangent: primal a_k plus t_k = d/de f(y + e·v).
// The tangent of the readout equals <grad_y f(y_i), v_i> per example, and
// because every step is built from tape primitives the result can be
// backpropagated to the parameters — the second-order piece the denoising
// objective needs. Returns (primal readout, tangent readout).
template <typename T>
std::pair<typename Tape<T>::Id, typename Tape<T>::Id> mlp_dual_forward_tape(Tape<T>& tape, ParamStore<T>& store,
                                                                            const MlpRef& net,
                                                                            typename Tape<T>::Id y,
                                                                            typename Tape<T>::Id v) {
    if (tape.val(y).cols != net.widths.front()) throw ShapeMismatch(net.prefix + ": dual forward input width");
    require_same_shape(tape.val(y), tape.val(v), "mlp_dual_forward");
    auto a = y;
    auto t = v;
    for (int k = 0; k < net.layer_count(); ++k) {
        auto w = tape.param(store, net.w_name(k));
        auto b = tape.param(store, net.b_name(k));
        auto z = tape.add_rowvec(tape.matmul(a, w), b);
        auto tz = tape.matmul(t, w);
        if (k + 1 < net.layer_count()) {
            t = tape.mul(tape.silu_prime(z), tz);
            a = tape.silu(z);
        } else {
            a = z;
            t = tz;
        }
    }
    return {a, t};
}

// Gradient w.r.t. the parameters of sum_i <grad_y f(y_i), v_i>, exact.
// Accumulates into the store's gradient buffers.
template <typename T>
void grad_of_input_grad(ParamStore<T>& store, const MlpRef& net, const Matrix<T>& y, const Matrix<T>& v) {
    if (net.widths.back() != 1) throw ShapeMismatch(net.prefix + ": grad_of_input_grad needs scalar output");
    Tape<T> tape;
    auto yid = tape.leaf(y, false);
    auto vid = tape.constant(v);
    auto [f, h] = mlp_dual_forward_tape(tape, store, net, yid, vid);
    (void)f;
    tape.backward(tape.sum(h));
    tape.add_param_grads();
}

}  // namespace ivae
