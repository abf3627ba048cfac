#pragma once

#include "ogmm/core/batch.hpp"
#include "ogmm/core/moment_model.hpp"
#include "ogmm/lrv/kernel_lrv.hpp"
#include "ogmm/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ogmm::offline {

/// Two-stage least squares: theta = (Xh^T Xh)^{-1} Xh^T y with
/// Xh = Z (Z^T Z)^{-1} Z^T X. Throws RankDeficient.
Vector tsls(const VectorCRef& y, const MatrixCRef& x, const MatrixCRef& z);

/// Closed-form linear GMM: (X^T Z W Z^T X)^{-1} X^T Z W Z^T y.
Vector linear_gmm(const VectorCRef& y, const MatrixCRef& x, const MatrixCRef& z, const MatrixCRef& w);

/// tsls on a batch in the IV layout [y, x(p), z(q)].
Vector tsls(const core::Batch& batch, Index p, Index q);

struct GaussNewtonOptions {
  int max_iters = 200;
  /// Stops once the relative objective decrease and the step are below tol.
  double tol = 1e-12;
  std::optional<Vector> lower, upper;
};

struct GaussNewtonResult {
  Vector theta;
  double objective = 0.0;
  int iterations = 0;
};

/// Residual map theta -> (m, dm/dtheta) of a quadratic objective m^T W m.
using ResidualFn = std::function<void(const Vector& theta, Vector& m, Matrix& jac)>;

/// Minimizes m(theta)^T W m(theta) by Gauss-Newton with backtracking and
/// projection onto an optional box. Parameters are Jacobi-scaled, and
/// coordinates held at a bound by the gradient are left out of the Newton
/// solve. Falls back to a scaled gradient step when the Gauss-Newton
/// direction does not descend. Throws OptimizerFailed
/// if the iteration limit is hit or the iterate becomes non-finite.
GaussNewtonResult gauss_newton(const ResidualFn& fn, Vector theta0, const MatrixCRef& w,
                               const GaussNewtonOptions& opts = {});

enum class LrvChoice { SampleCovariance, Bartlett, Kernel };

/// Variance of the moment rows under the chosen estimator (pd-adjusted).
Matrix moment_variance(const MatrixCRef& rows, LrvChoice choice, const lrv::KernelLrvConfig& klrv = {});

struct TwoStepOptions {
  LrvChoice lrv = LrvChoice::SampleCovariance;
  lrv::KernelLrvConfig klrv{};
  GaussNewtonOptions gn{};
  /// Starting value of the first step (zeros when unset).
  std::optional<Vector> theta_start;
  /// Further first-step starting values; the lowest first-step objective
  /// wins. Starts whose optimization fails are skipped unless all fail.
  std::vector<Vector> extra_starts;
};

struct TwoStepResult {
  Vector theta;        // second-step estimate
  Vector theta_step1;  // identity-weighted estimate
  Matrix sigma;        // variance estimate at theta_step1
  Matrix weight;       // pd_adjust(sigma)^{-1}
  double objective = 0.0;  // gbar^T W gbar at theta
  double j_statistic = 0.0;  // n * objective
};

/// Two-step GMM: identity weighting first, then W = Sigma^{-1} with Sigma
/// estimated from the moments at the first-step estimate.
TwoStepResult twostep_gmm(const core::MomentModel& model, const core::Batch& data, const TwoStepOptions& opts = {});

/// Smoothed check-loss fit for quantile regression on x-rows with
/// responses y. Newton iterations with backtracking, continued over a
/// decreasing bandwidth sequence that ends at h = sqrt(p/n). Requires
/// n >= 5p; throws NoConvergence if the mean gradient does not fall
/// below tol.
Vector initial_quantile_fit(const VectorCRef& y, const MatrixCRef& x, double tau, double tol = 1e-8);

/// Mean gradient of the smoothed check loss at theta with bandwidth h.
Vector smoothed_check_gradient(const VectorCRef& y, const MatrixCRef& x, double tau, double h,
                               const VectorCRef& theta);

}  // namespace ogmm::offline
