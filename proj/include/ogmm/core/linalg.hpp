#pragma once

#include "ogmm/types.hpp"

namespace ogmm::core {

/// Solves (V^T W V) delta = V^T W u for the GMM Newton step. A failed or
/// badly conditioned Cholesky factorization is retried once with a ridge
/// of 1e-10 * (1 + trace/p); SingularSystem is thrown if that fails too.
Vector gmm_step(const MatrixCRef& v, const MatrixCRef& w, const VectorCRef& u);

/// Same as gmm_step but also returns (V^T W u)^T (V^T W V)^{-1} (V^T W u),
/// the squared length of the step in the local metric.
Vector gmm_step(const MatrixCRef& v, const MatrixCRef& w, const VectorCRef& u, double& decrement);

/// x^T S^{-1} x through a Cholesky factor of S. Throws SingularSystem when
/// S is not numerically positive definite.
double inverse_quadratic(const MatrixCRef& s, const VectorCRef& x);

/// S^{-1} B through a Cholesky factor of S.
Matrix spd_solve(const MatrixCRef& s, const MatrixCRef& b);

/// S^{-1} for a symmetric positive definite S (symmetrized output).
Matrix spd_inverse(const MatrixCRef& s);

}  // namespace ogmm::core
