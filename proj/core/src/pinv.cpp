#include "rgns/pinv.hpp"

#include <algorithm>
#include <cmath>

namespace rgns {

namespace {

// One-sided Jacobi: rotate column pairs of A until all pairs are mutually
// orthogonal, accumulating the rotations in V. Afterwards the column norms
// are the singular values and the normalized columns form U.
struct JacobiResult {
    Mat<double> A;  // m x n, columns = u_j * sigma_j
    Mat<double> V;  // n x n
    std::vector<double> sigma;
};

JacobiResult one_sided_jacobi(const Mat<double>& W) {
    const int m = W.rows, n = W.cols;
    JacobiResult r;
    r.A = W;
    r.V = Mat<double>(n, n);
    for (int j = 0; j < n; ++j) r.V(j, j) = 1.0;

    const double tol = 1e-15;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0, aqq = 0, apq = 0;
                for (int i = 0; i < m; ++i) {
                    const double aip = r.A(i, p), aiq = r.A(i, q);
                    app += aip * aip;
                    aqq += aiq * aiq;
                    apq += aip * aiq;
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < m; ++i) {
                    const double aip = r.A(i, p), aiq = r.A(i, q);
                    r.A(i, p) = c * aip - s * aiq;
                    r.A(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = r.V(i, p), viq = r.V(i, q);
                    r.V(i, p) = c * vip - s * viq;
                    r.V(i, q) = s * vip + c * viq;
                }
            }
        }
        if (!rotated) break;
    }

    r.sigma.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double s2 = 0;
        for (int i = 0; i < m; ++i) s2 += r.A(i, j) * r.A(i, j);
        r.sigma[static_cast<std::size_t>(j)] = std::sqrt(s2);
    }
    return r;
}

Mat<double> transpose(const Mat<double>& M) {
    Mat<double> T(M.cols, M.rows);
    for (int i = 0; i < M.rows; ++i)
        for (int j = 0; j < M.cols; ++j) T(j, i) = M(i, j);
    return T;
}

}  // namespace

Mat<double> pseudo_inverse(const Mat<double>& W, double sigma_tol) {
    if (W.rows == 0 || W.cols == 0) throw config_error("pseudo_inverse: empty matrix");
    if (!all_finite(W)) throw numeric_error("pseudo_inverse: non-finite entries");
    if (sigma_tol < 0) throw config_error("pseudo_inverse: sigma_tol must be >= 0");
    if (W.rows < W.cols) return transpose(pseudo_inverse(transpose(W), sigma_tol));

    const JacobiResult f = one_sided_jacobi(W);
    const int m = W.rows, n = W.cols;
    const double smax = *std::max_element(f.sigma.begin(), f.sigma.end());
    if (smax == 0.0) throw numeric_error("pseudo_inverse: effective rank 0");
    const double cut = sigma_tol * smax;

    // W+ = sum_j sigma_j^-1 v_j u_j^T over kept singular triplets,
    // with u_j = A_col_j / sigma_j, i.e. W+ = sum_j sigma_j^-2 v_j a_j^T.
    Mat<double> P(n, m);
    bool any = false;
    for (int j = 0; j < n; ++j) {
        const double s = f.sigma[static_cast<std::size_t>(j)];
        if (s <= cut || s == 0.0) continue;
        any = true;
        const double inv_s2 = 1.0 / (s * s);
        for (int row = 0; row < n; ++row) {
            const double vj = f.V(row, j) * inv_s2;
            if (vj == 0.0) continue;
            for (int col = 0; col < m; ++col) P(row, col) += vj * f.A(col, j);
        }
    }
    if (!any) throw numeric_error("pseudo_inverse: effective rank 0");
    return P;
}

std::vector<double> singular_values(const Mat<double>& W) {
    if (!all_finite(W)) throw numeric_error("singular_values: non-finite entries");
    const Mat<double>* M = &W;
    Mat<double> Wt;
    if (W.rows < W.cols) {
        Wt = transpose(W);
        M = &Wt;
    }
    JacobiResult f = one_sided_jacobi(*M);
    std::sort(f.sigma.begin(), f.sigma.end(), std::greater<>());
    return f.sigma;
}

}  // namespace rgns
