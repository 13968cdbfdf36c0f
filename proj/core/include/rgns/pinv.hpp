#pragma once

#include "rgns/mat.hpp"

namespace rgns {

// Moore-Penrose pseudo-inverse via one-sided Jacobi SVD, always computed in
// double. Singular values below sigma_tol * sigma_max are treated as zero.
// Throws numeric_error on non-finite input or effective rank 0.
Mat<double> pseudo_inverse(const Mat<double>& W, double sigma_tol = 1e-8);

// Singular values of W in descending order (same factorization).
std::vector<double> singular_values(const Mat<double>& W);

}  // namespace rgns
