#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "rgns/error.hpp"
#include "rgns/mat.hpp"

namespace rgns {

// Named view onto one parameter tensor; the optimizer and the checkpoint
// writer both walk the same flat registry.
template <std::floating_point T>
struct TensorRef {
    std::string name;
    T* data = nullptr;
    std::size_t size = 0;
};

inline double cosine_lr(double lr0, long pos, long total_steps) {
    if (total_steps <= 0) return lr0;
    if (pos >= total_steps) return 0.0;
    if (pos < 0) pos = 0;
    const double x = static_cast<double>(pos) / static_cast<double>(total_steps);
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

template <std::floating_point T>
struct AdamState {
    long step = 0;
    std::vector<T> m, v;  // flat, concatenated over the registry order
    double lr0 = 1e-4;
    long total_steps = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <std::floating_point T>
AdamState<T> make_adam(const std::vector<TensorRef<T>>& params, double lr0, long total_steps) {
    AdamState<T> st;
    st.lr0 = lr0;
    st.total_steps = total_steps;
    std::size_t n = 0;
    for (const auto& p : params) n += p.size;
    st.m.assign(n, T(0));
    st.v.assign(n, T(0));
    return st;
}

// One bias-corrected Adam update with cosine-decayed learning rate.
// `params` and `grads` must enumerate the same tensors in the same order.
template <std::floating_point T>
void adam_step(AdamState<T>& st, const std::vector<TensorRef<T>>& params,
               const std::vector<TensorRef<T>>& grads, long schedule_pos) {
    if (params.size() != grads.size()) throw contract_error("adam_step: registry size mismatch");
    st.step += 1;
    const double lr = cosine_lr(st.lr0, schedule_pos, st.total_steps);
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    std::size_t off = 0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].size != grads[t].size) throw contract_error("adam_step: tensor shape mismatch");
        T* w = params[t].data;
        const T* g = grads[t].data;
        for (std::size_t i = 0; i < params[t].size; ++i) {
            const double gi = static_cast<double>(g[i]);
            if (!std::isfinite(gi))
                throw numeric_error("adam_step: non-finite gradient in " + params[t].name);
            const std::size_t j = off + i;
            const double m = st.beta1 * static_cast<double>(st.m[j]) + (1.0 - st.beta1) * gi;
            const double v = st.beta2 * static_cast<double>(st.v[j]) + (1.0 - st.beta2) * gi * gi;
            st.m[j] = static_cast<T>(m);
            st.v[j] = static_cast<T>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + st.eps));
        }
        off += params[t].size;
    }
}

}  // namespace rgns
