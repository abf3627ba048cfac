#pragma once

#include "ogmm/core/moment_model.hpp"

namespace ogmm::moments {

/// Haar wavelet variance of a stationary AR(1) with coefficient rho and
/// innovation variance sigma2 at filter width tau = 2^j.
double ar1_wavelet_variance(double rho, double sigma2, double tau);
/// Derivative of ar1_wavelet_variance with respect to rho.
double ar1_wavelet_variance_drho(double rho, double sigma2, double tau);

/// Feasible box used by the offline fit and the simulator.
struct GmwmBounds {
  double rho_lo = 1e-4, rho_hi = 0.9999;
  double sigma2_lo = 1e-13, sigma2_hi = 1e-5;
};

/// Wavelet-variance moments for a sum of k latent AR(1) processes (k in
/// 1..3) plus white noise. theta = (rho_1, s2_1, ..., rho_k, s2_k, s2_wn),
/// so p = 2k + 1. Observations are the q wavelet coefficients of one time
/// point, levels 1..q; level j has filter width tau_j = 2^j and
///   g_j = scale * (w_j^2 - nu_j(theta)).
/// `scale` only rescales the moments; it exists because the variance
/// floor used before inverting weighting matrices is absolute, and raw
/// wavelet variances of inertial sensors are tiny.
class GmwmMoment final : public core::MomentModel {
 public:
  GmwmMoment(int ar_components, Index levels, double scale = 1.0);

  Index num_params() const override { return 2 * k_ + 1; }
  Index num_moments() const override { return q_; }
  Index obs_dim() const override { return q_; }
  std::string name() const override { return "gmwm"; }
  int ar_components() const { return k_; }
  double scale() const { return scale_; }

  /// Model-implied wavelet variance at level j (1-based).
  double nu(const VectorCRef& theta, Index j) const;
  /// All q implied variances.
  Vector nu_all(const VectorCRef& theta) const;
  /// Jacobian of nu_all (q x p).
  Matrix nu_jacobian(const VectorCRef& theta) const;

  Vector moment(const VectorCRef& theta, const VectorCRef& obs, double aux) const override;
  Matrix gradient(const VectorCRef& theta, const VectorCRef& obs, double aux) const override;
  core::BatchMoments evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const override;

  /// Reorders the AR components by decreasing rho. The moments are
  /// invariant under relabeling the components, so fitted values are
  /// compared in this order.
  Vector canonical(const VectorCRef& theta) const;

  /// Projects theta onto the feasible box.
  Vector project(const VectorCRef& theta, const GmwmBounds& bounds = {}) const;
  /// Lower and upper box limits in parameter order.
  std::pair<Vector, Vector> box(const GmwmBounds& bounds = {}) const;

 private:
  void check_theta(const VectorCRef& theta) const;

  int k_;
  Index q_;
  double scale_;
};

}  // namespace ogmm::moments
