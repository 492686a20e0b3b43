#ifndef DDSC_LINALG_HPP
#define DDSC_LINALG_HPP

#include "ddsc/types.hpp"

namespace ddsc {

/// Numerical rank via singular values, threshold max_dim * sigma_max * rel_tol.
int numerical_rank(const Matrix& m, double rel_tol = kRankRelTol);

/// Orthonormal basis of the column space of m.
Matrix orthonormal_range(const Matrix& m, double rel_tol = kRankRelTol);

/// Orthonormal basis of the null space of m (columns). Identity span for 0-row input.
Matrix orthonormal_nullspace(const Matrix& m, double rel_tol = kRankRelTol);

/// Moore-Penrose pseudo-inverse with singular-value cutoff.
Matrix pseudo_inverse(const Matrix& m, double rel_tol = kRankRelTol);

/// Least-squares solution via SVD cutoff: pseudo_inverse(a) * b, without forming the inverse.
Matrix svd_solve(const Matrix& a, const Matrix& b, double rel_tol = kRankRelTol);

/// True if all entries are within abs_tol of zero. Empty matrices are zero.
bool is_zero(const Matrix& m, double abs_tol = kZeroAbsTol);

}  // namespace ddsc

#endif
