#pragma once

#include <random>
#include <type_traits>
#include <string>
#include <vector>

#include "rgns/mat.hpp"

namespace rgns {

enum class Activation { relu, none };

template <std::floating_point T>
struct Dense {
    Mat<T> W;           // out x in
    std::vector<T> b;   // out
};

// Plain feed-forward net: affine layers with the activation between them,
// none after the last. Gradients are computed by explicit reverse
// accumulation; the cache captures each layer's input batch.
template <std::floating_point T>
struct Mlp {
    std::vector<Dense<T>> layers;
    Activation act = Activation::relu;

    int in_dim() const { return layers.empty() ? 0 : layers.front().W.cols; }
    int out_dim() const { return layers.empty() ? 0 : layers.back().W.rows; }
};

template <std::floating_point T>
struct MlpCache {
    std::vector<Mat<T>> inputs;  // inputs[l] = batch fed to layer l
};

// Gradient container with the same tensor layout as the net itself.
template <std::floating_point T>
Mlp<T> zeros_like(const Mlp<T>& m) {
    Mlp<T> g;
    g.act = m.act;
    g.layers.reserve(m.layers.size());
    for (const auto& l : m.layers) {
        Dense<T> d;
        d.W = Mat<T>(l.W.rows, l.W.cols);
        d.b.assign(l.b.size(), T(0));
        g.layers.push_back(std::move(d));
    }
    return g;
}

// Hidden widths between in_dim and out_dim; weights ~ N(0, gain/sqrt(fan_in)),
// biases ~ U(-gain/sqrt(fan_in), gain/sqrt(fan_in)). Residual subnetworks use
// gain < 1 so a randomly initialized stack keeps its latents O(1) at any
// depth. Nonzero bias init keeps dead batch rows off the exact relu kink,
// where finite differences of the loss are undefined.
template <std::floating_point T>
Mlp<T> make_mlp(const std::vector<int>& dims, std::mt19937_64& rng,
                Activation act = Activation::relu, double gain = 1.0) {
    if (dims.size() < 2) throw config_error("make_mlp: need at least in/out dims");
    Mlp<T> m;
    m.act = act;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Dense<T> d;
        const double scale = gain / std::sqrt(static_cast<double>(dims[l]));
        d.W = gaussian_mat<T>(dims[l + 1], dims[l], scale, rng);
        d.b.resize(static_cast<std::size_t>(dims[l + 1]));
        std::uniform_real_distribution<double> u(-scale, scale);
        for (auto& b : d.b) b = static_cast<T>(u(rng));
        m.layers.push_back(std::move(d));
    }
    return m;
}

template <std::floating_point T>
void relu_inplace(Mat<T>& m) {
    for (auto& v : m.a)
        if (v < T(0)) v = T(0);
}

// Batched forward: X is n x in_dim, returns n x out_dim.
template <std::floating_point T>
Mat<T> mlp_forward(const Mlp<T>& m, const Mat<T>& X,
                   std::type_identity_t<MlpCache<T>*> cache = nullptr) {
    if (m.layers.empty()) throw config_error("mlp_forward: empty net");
    if (X.cols != m.in_dim()) throw config_error("mlp_forward: input width mismatch");
    if (cache) cache->inputs.clear();
    Mat<T> z = X;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& d = m.layers[l];
        Mat<T> y(z.rows, d.W.rows);
        gemm_nt(z, d.W, y);
        for (int i = 0; i < y.rows; ++i) {
            T* yi = y.row(i);
            for (int o = 0; o < y.cols; ++o) yi[o] += d.b[static_cast<std::size_t>(o)];
        }
        if (cache) cache->inputs.push_back(std::move(z));
        if (l + 1 < m.layers.size() && m.act == Activation::relu) relu_inplace(y);
        z = std::move(y);
    }
    return z;
}

// Reverse accumulation through the cached forward pass. Returns dX and
// accumulates parameter gradients into `grads` (same layout as the net).
template <std::floating_point T>
Mat<T> mlp_backward(const Mlp<T>& m, const MlpCache<T>& cache, const Mat<T>& dY, Mlp<T>& grads) {
    if (cache.inputs.size() != m.layers.size())
        throw contract_error("mlp_backward: cache does not match net");
    if (grads.layers.size() != m.layers.size())
        throw contract_error("mlp_backward: grads layout mismatch");
    if (dY.cols != m.out_dim() || dY.rows != cache.inputs.front().rows)
        throw contract_error("mlp_backward: upstream gradient shape mismatch");

    Mat<T> d = dY;
    for (int l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
        const auto& dense = m.layers[static_cast<std::size_t>(l)];
        const Mat<T>& z = cache.inputs[static_cast<std::size_t>(l)];
        auto& g = grads.layers[static_cast<std::size_t>(l)];
        // db
        for (int i = 0; i < d.rows; ++i) {
            const T* di = d.row(i);
            for (int o = 0; o < d.cols; ++o) g.b[static_cast<std::size_t>(o)] += di[o];
        }
        // dW += d^T z
        gemm_tn(d, z, g.W, /*acc=*/true);
        // dz = d W
        Mat<T> dz(z.rows, z.cols);
        gemm_nn(d, dense.W, dz);
        if (l > 0 && m.act == Activation::relu) {
            // z was produced by relu, so z > 0 marks the active units
            for (std::size_t i = 0; i < dz.a.size(); ++i)
                if (z.a[i] <= T(0)) dz.a[i] = T(0);
        }
        d = std::move(dz);
    }
    return d;
}

// Single-vector wrappers used by unit oracles and small call sites.
template <std::floating_point T>
std::vector<T> mlp_forward_vec(const Mlp<T>& m, const std::vector<T>& x,
                               std::type_identity_t<MlpCache<T>*> cache = nullptr) {
    Mat<T> X(1, static_cast<int>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) X(0, static_cast<int>(j)) = x[j];
    Mat<T> Y = mlp_forward(m, X, cache);
    return std::vector<T>(Y.a.begin(), Y.a.end());
}

template <std::floating_point T>
std::vector<T> mlp_backward_vec(const Mlp<T>& m, const MlpCache<T>& cache, const std::vector<T>& dy,
                                Mlp<T>& grads) {
    Mat<T> dY(1, static_cast<int>(dy.size()));
    for (std::size_t j = 0; j < dy.size(); ++j) dY(0, static_cast<int>(j)) = dy[j];
    Mat<T> dX = mlp_backward(m, cache, dY, grads);
    return std::vector<T>(dX.a.begin(), dX.a.end());
}

}  // namespace rgns
