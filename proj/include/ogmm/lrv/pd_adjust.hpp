#pragma once

#include "ogmm/types.hpp"

namespace ogmm::lrv {

/// Eigenvalue floor used by pd_adjust: 1e-8 * (1 + trace(M)/q), with a
/// negative trace treated as zero.
double pd_floor(const MatrixCRef& m);

/// Clips the eigenvalues of a symmetric matrix from below at pd_floor(m).
/// Matrices whose smallest eigenvalue already clears the floor are returned
/// bit-for-bit unchanged.
Matrix pd_adjust(const MatrixCRef& m);

}  // namespace ogmm::lrv
