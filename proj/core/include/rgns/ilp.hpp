#pragma once

#include "rgns/mlp.hpp"
#include "rgns/pinv.hpp"

namespace rgns {

// Invertible linear projection: n = W chi + B up, chi = W+ (n - B) down.
// W+ is a dependent quantity recomputed from W after every update; the
// double-precision master is kept alongside a working-precision cast.
template <std::floating_point T>
struct IlpParams {
    Mat<T> W;                // d x C
    std::vector<T> B;        // d
    Mat<double> W_pinv;      // C x d, double master
    Mat<T> W_pinv_t;         // cast of the master used on the decode path
    bool stale = true;

    int latent_dim() const { return W.rows; }
    int phys_dim() const { return W.cols; }
};

template <std::floating_point T>
void refresh_pinv(IlpParams<T>& ilp, double sigma_tol = 1e-8, double rank_guard = 1e-6) {
    const Mat<double> Wd = cast_mat<double>(ilp.W);
    const auto sv = singular_values(Wd);
    if (sv.front() == 0.0 || sv.back() / sv.front() <= rank_guard)
        throw numeric_error("ilp: degenerate projection (rank-deficient W)");
    ilp.W_pinv = pseudo_inverse(Wd, sigma_tol);
    ilp.W_pinv_t = cast_mat<T>(ilp.W_pinv);
    ilp.stale = false;
}

template <std::floating_point T>
IlpParams<T> init_ilp(int d, int C, std::mt19937_64& rng) {
    if (d <= C) throw config_error("ilp: latent dim must exceed physical dim");
    IlpParams<T> ilp;
    ilp.W = gaussian_mat<T>(d, C, 1.0 / std::sqrt(static_cast<double>(C)), rng);
    ilp.B.assign(static_cast<std::size_t>(d), T(0));
    refresh_pinv(ilp);
    return ilp;
}

// Rows of Chi are per-node physical vectors; returns per-node latents.
template <std::floating_point T>
Mat<T> ilp_encode(const IlpParams<T>& ilp, const Mat<T>& Chi) {
    if (Chi.cols != ilp.phys_dim()) throw config_error("ilp_encode: width mismatch");
    Mat<T> N(Chi.rows, ilp.latent_dim());
    gemm_nt(Chi, ilp.W, N);
    for (int i = 0; i < N.rows; ++i) {
        T* row = N.row(i);
        for (int j = 0; j < N.cols; ++j) row[j] += ilp.B[static_cast<std::size_t>(j)];
    }
    return N;
}

template <std::floating_point T>
Mat<T> ilp_decode(const IlpParams<T>& ilp, const Mat<T>& N) {
    if (ilp.stale) throw contract_error("ilp_decode: W_pinv is stale, call refresh_pinv");
    if (N.cols != ilp.latent_dim()) throw config_error("ilp_decode: width mismatch");
    Mat<T> shifted = N;
    for (int i = 0; i < shifted.rows; ++i) {
        T* row = shifted.row(i);
        for (int j = 0; j < shifted.cols; ++j) row[j] -= ilp.B[static_cast<std::size_t>(j)];
    }
    Mat<T> Chi(N.rows, ilp.phys_dim());
    gemm_nt(shifted, ilp.W_pinv_t, Chi);
    return Chi;
}

// VJP of encode: accumulates dW += dN^T Chi and dB += colsum(dN).
template <std::floating_point T>
void ilp_encode_vjp(const Mat<T>& Chi, const Mat<T>& dN, Mat<T>& dW, std::vector<T>& dB) {
    gemm_tn(dN, Chi, dW, /*acc=*/true);
    for (int i = 0; i < dN.rows; ++i) {
        const T* row = dN.row(i);
        for (int j = 0; j < dN.cols; ++j) dB[static_cast<std::size_t>(j)] += row[j];
    }
}

// VJP of decode with W+ held fixed within the step: dN = dChi * W+,
// dB -= colsum(dN).
template <std::floating_point T>
Mat<T> ilp_decode_vjp(const IlpParams<T>& ilp, const Mat<T>& dChi, std::vector<T>& dB) {
    Mat<T> dN(dChi.rows, ilp.latent_dim());
    gemm_nn(dChi, ilp.W_pinv_t, dN);
    for (int i = 0; i < dN.rows; ++i) {
        const T* row = dN.row(i);
        for (int j = 0; j < dN.cols; ++j) dB[static_cast<std::size_t>(j)] -= row[j];
    }
    return dN;
}

// Edge encoder: per-edge MLP from geometric features to a d-wide latent,
// split downstream into two halves.
template <std::floating_point T>
struct EdgeEncoderParams {
    Mlp<T> net;
};

template <std::floating_point T>
Mat<T> encode_edges(const EdgeEncoderParams<T>& enc, const Mat<T>& geom,
                    std::type_identity_t<MlpCache<T>*> cache = nullptr) {
    Mat<T> latent = mlp_forward(enc.net, geom, cache);
    if (latent.cols % 2 != 0) throw config_error("encode_edges: latent width must be even");
    return latent;
}

template <std::floating_point T>
void split_halves(const Mat<T>& full, Mat<T>& first, Mat<T>& second) {
    const int h = full.cols / 2;
    first = Mat<T>(full.rows, h);
    second = Mat<T>(full.rows, h);
    for (int i = 0; i < full.rows; ++i) {
        const T* src = full.row(i);
        std::copy(src, src + h, first.row(i));
        std::copy(src + h, src + 2 * h, second.row(i));
    }
}

template <std::floating_point T>
Mat<T> join_halves(const Mat<T>& first, const Mat<T>& second) {
    Mat<T> full(first.rows, first.cols * 2);
    for (int i = 0; i < full.rows; ++i) {
        std::copy(first.row(i), first.row(i) + first.cols, full.row(i));
        std::copy(second.row(i), second.row(i) + second.cols, full.row(i) + first.cols);
    }
    return full;
}

}  // namespace rgns
