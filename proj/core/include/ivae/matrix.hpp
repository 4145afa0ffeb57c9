#pragma once

#include <cstddef>
#include <vector>

#include "ivae/errors.hpp"

namespace ivae {

// Dense row-major matrix. The one container every numeric path uses;
// kernels below keep a fixed accumulation order so results are
// reproducible bit-for-bit run to run.
template <typename T>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), T(0)) {}

    T& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    T operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }

    T* row(int i) { return v.data() + static_cast<std::size_t>(i) * cols; }
    const T* row(int i) const { return v.data() + static_cast<std::size_t>(i) * cols; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }
};

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(where) + ": shapes (" + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                            ") vs (" + std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
    }
}

// C += A * B, A: n×k, B: k×m. ikj order: the j loop runs over contiguous
// memory in both B and C and vectorizes; the k accumulation is sequential
// ascending, which the duplicate-implementation oracle relies on.
template <typename T>
void gemm_nn_acc(Matrix<T>& c, const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) {
        throw ShapeMismatch("gemm_nn: incompatible shapes");
    }
    const int n = a.rows, k = a.cols, m = b.cols;
    for (int i = 0; i < n; ++i) {
        const T* ai = a.row(i);
        T* ci = c.row(i);
        for (int l = 0; l < k; ++l) {
            const T s = ai[l];
            const T* bl = b.row(l);
            for (int j = 0; j < m; ++j) ci[j] += s * bl[j];
        }
    }
}

// C += A * B^T, A: n×k, B: m×k.
template <typename T>
void gemm_nt_acc(Matrix<T>& c, const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows) {
        throw ShapeMismatch("gemm_nt: incompatible shapes");
    }
    const int n = a.rows, k = a.cols, m = b.rows;
    for (int i = 0; i < n; ++i) {
        const T* ai = a.row(i);
        T* ci = c.row(i);
        for (int j = 0; j < m; ++j) {
            const T* bj = b.row(j);
            T acc = T(0);
            for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
            ci[j] += acc;
        }
    }
}

// C += A^T * B, A: n×k, B: n×m, C: k×m.
template <typename T>
void gemm_tn_acc(Matrix<T>& c, const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols) {
        throw ShapeMismatch("gemm_tn: incompatible shapes");
    }
    const int n = a.rows, k = a.cols, m = b.cols;
    for (int i = 0; i < n; ++i) {
        const T* ai = a.row(i);
        const T* bi = b.row(i);
        for (int l = 0; l < k; ++l) {
            const T s = ai[l];
            T* cl = c.row(l);
            for (int j = 0; j < m; ++j) cl[j] += s * bi[j];
        }
    }
}

template <typename T, typename U>
Matrix<U> matrix_cast(const Matrix<T>& a) {
    Matrix<U> out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.v[i] = static_cast<U>(a.v[i]);
    return out;
}

}  // namespace ivae
