#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <random>
#include <vector>

#include "rgns/error.hpp"
#include "rgns/threading.hpp"

namespace rgns {

// Dense row-major matrix. Sized for the small per-layer weights and
// per-batch activations this project needs; nothing clever.
template <std::floating_point T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), T(0)) {}

    T& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    T operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
    T* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const T* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }
    std::size_t size() const { return a.size(); }

    void fill(T v) { std::fill(a.begin(), a.end(), v); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

template <std::floating_point T, std::floating_point U>
Mat<T> cast_mat(const Mat<U>& m) {
    Mat<T> out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.a.size(); ++i) out.a[i] = static_cast<T>(m.a[i]);
    return out;
}

template <std::floating_point T>
bool all_finite(const Mat<T>& m) {
    for (T v : m.a)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

// C = A * B^T (+ C if acc). A: n x k, B: m x k, C: n x m.
// Inner products run in ascending k order; rows are independent, so the
// row-parallel split keeps results bit-identical at any thread count.
template <std::floating_point T>
void gemm_nt(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    if (A.cols != B.cols || C.rows != A.rows || C.cols != B.rows)
        throw config_error("gemm_nt: shape mismatch");
    const int k = A.cols, m = B.rows;
    parallel_for(static_cast<std::size_t>(A.rows), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const T* ai = A.row(static_cast<int>(i));
            T* ci = C.row(static_cast<int>(i));
            for (int o = 0; o < m; ++o) {
                const T* bo = B.row(o);
                T s = 0;
                for (int j = 0; j < k; ++j) s += ai[j] * bo[j];
                ci[o] = acc ? ci[o] + s : s;
            }
        }
    });
}

// C = A * B (+ C if acc). A: n x m, B: m x k, C: n x k.
template <std::floating_point T>
void gemm_nn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    if (A.cols != B.rows || C.rows != A.rows || C.cols != B.cols)
        throw config_error("gemm_nn: shape mismatch");
    const int m = A.cols, k = B.cols;
    parallel_for(static_cast<std::size_t>(A.rows), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const T* ai = A.row(static_cast<int>(i));
            T* ci = C.row(static_cast<int>(i));
            if (!acc)
                for (int c = 0; c < k; ++c) ci[c] = 0;
            for (int j = 0; j < m; ++j) {
                const T aij = ai[j];
                if (aij == T(0)) continue;
                const T* bj = B.row(j);
                for (int c = 0; c < k; ++c) ci[c] += aij * bj[c];
            }
        }
    });
}

// C = A^T * B (+ C if acc). A: n x m, B: n x k, C: m x k.
template <std::floating_point T>
void gemm_tn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        throw config_error("gemm_tn: shape mismatch");
    const int n = A.rows, k = B.cols;
    parallel_for(static_cast<std::size_t>(A.cols), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
            T* cj = C.row(static_cast<int>(j));
            if (!acc)
                for (int c = 0; c < k; ++c) cj[c] = 0;
            for (int i = 0; i < n; ++i) {
                const T aij = A(i, static_cast<int>(j));
                if (aij == T(0)) continue;
                const T* bi = B.row(i);
                for (int c = 0; c < k; ++c) cj[c] += aij * bi[c];
            }
        }
    });
}

// y = M x (+ y if acc). Single-vector convenience used by the oracles and
// the ILP; batched paths use the gemm kernels.
template <std::floating_point T>
void matvec(const Mat<T>& M, const std::vector<T>& x, std::vector<T>& y, bool acc = false) {
    if (static_cast<int>(x.size()) != M.cols) throw config_error("matvec: shape mismatch");
    y.resize(static_cast<std::size_t>(M.rows));
    for (int i = 0; i < M.rows; ++i) {
        const T* mi = M.row(i);
        T s = 0;
        for (int j = 0; j < M.cols; ++j) s += mi[j] * x[j];
        y[static_cast<std::size_t>(i)] = acc ? y[static_cast<std::size_t>(i)] + s : s;
    }
}

template <std::floating_point T>
Mat<T> gaussian_mat(int rows, int cols, double scale, std::mt19937_64& rng) {
    Mat<T> m(rows, cols);
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& v : m.a) v = static_cast<T>(dist(rng));
    return m;
}

}  // namespace rgns
