#pragma once

#include "ogmm/types.hpp"

#include <optional>

namespace ogmm::lrv {

/// Bandwidth for the offline Bartlett estimator: a fixed value, or the
/// Andrews AR(1) plug-in when unset.
struct BartlettConfig {
  std::optional<double> bandwidth;
};

/// Andrews (1991) AR(1) plug-in bandwidth, fitted per column, no prewhitening.
double andrews_ar1_bandwidth(const MatrixCRef& x);

/// Bartlett-kernel HAC estimate of the long-run variance of the rows of x
/// (N x q). Rows are demeaned first; autocovariances use divisor N.
Matrix bartlett_offline(const MatrixCRef& x, const BartlettConfig& cfg = {});

/// Sample covariance with divisor N (rows are observations).
Matrix sample_covariance(const MatrixCRef& x);

}  // namespace ogmm::lrv
