#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "ivae/matrix.hpp"
#include "ivae/rng.hpp"

namespace ivae {

// Named, shaped parameter arrays with co-located gradient buffers.
// Iteration follows insertion order everywhere (serialization, Adam,
// gradient reductions), which is what makes training byte-reproducible.
template <typename T>
class ParamStore {
  public:
    int add(const std::string& name, Matrix<T> value) {
        if (index_.count(name)) throw Error("ParamStore: duplicate name " + name);
        const int idx = static_cast<int>(names_.size());
        index_[name] = idx;
        names_.push_back(name);
        grads_.emplace_back(value.rows, value.cols);
        values_.push_back(std::move(value));
        return idx;
    }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error("ParamStore: unknown name " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    int count() const { return static_cast<int>(names_.size()); }
    const std::string& name(int i) const { return names_[i]; }

    Matrix<T>& value(int i) { return values_[i]; }
    const Matrix<T>& value(int i) const { return values_[i]; }
    Matrix<T>& value(const std::string& name) { return values_[index_of(name)]; }
    const Matrix<T>& value(const std::string& name) const { return values_[index_of(name)]; }

    Matrix<T>& grad(int i) { return grads_[i]; }
    const Matrix<T>& grad(int i) const { return grads_[i]; }
    Matrix<T>& grad(const std::string& name) { return grads_[index_of(name)]; }

    void zero_grads() {
        for (auto& g : grads_) g.fill(T(0));
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& m : values_) n += m.size();
        return n;
    }

  private:
    std::vector<std::string> names_;
    std::vector<Matrix<T>> values_;
    std::vector<Matrix<T>> grads_;
    std::unordered_map<std::string, int> index_;
};

template <typename T, typename U>
ParamStore<U> store_cast(const ParamStore<T>& in) {
    ParamStore<U> out;
    for (int i = 0; i < in.count(); ++i) out.add(in.name(i), matrix_cast<T, U>(in.value(i)));
    return out;
}

// Standard bias-corrected Adam. Moments are allocated lazily to match the
// store layout; shapes are rechecked each step.
template <typename T>
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Matrix<T>> m;
    std::vector<Matrix<T>> v;
};

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
    if (state.m.empty()) {
        for (int i = 0; i < params.count(); ++i) {
            const auto& p = params.value(i);
            state.m.emplace_back(p.rows, p.cols);
            state.v.emplace_back(p.rows, p.cols);
        }
    }
    if (static_cast<int>(state.m.size()) != params.count()) {
        throw ShapeMismatch("adam_step: state does not match parameter store");
    }
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (int i = 0; i < params.count(); ++i) {
        auto& p = params.value(i);
        const auto& g = params.grad(i);
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (!p.same_shape(g) || !p.same_shape(m)) throw ShapeMismatch("adam_step: moment/grad shape mismatch");
        const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
        const T ib1 = static_cast<T>(1.0 - state.beta1), ib2 = static_cast<T>(1.0 - state.beta2);
        const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
        const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const T gk = g.v[k];
            m.v[k] = b1 * m.v[k] + ib1 * gk;
            v.v[k] = b2 * v.v[k] + ib2 * gk * gk;
            const T mhat = m.v[k] * ic1;
            const T vhat = v.v[k] * ic2;
            p.v[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// He initialization: W ~ N(0, 2/fan_in), biases zero. fan_in is the row
// count of the (in × out) weight matrix.
template <typename T>
Matrix<T> he_weight(int fan_in, int fan_out, RngStream& stream) {
    Matrix<T> w(fan_in, fan_out);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& x : w.v) x = static_cast<T>(sd * stream.gauss());
    return w;
}

}  // namespace ivae
