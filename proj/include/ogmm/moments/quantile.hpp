#pragma once

#include "ogmm/core/moment_model.hpp"

#include <cmath>
#include <cstddef>

namespace ogmm::moments {

/// Biweight-integrated smoother of the indicator 1{u > 0}:
/// H(u) = 1/2 + 15/16 (u - 2u^3/3 + u^5/5) on |u| < 1, 0 below, 1 above.
double smooth_step(double u);
/// dH/du = 15/16 (1 - u^2)^2 on |u| < 1.
double smooth_step_derivative(double u);
/// Antiderivative of H vanishing at -1 (used by the smoothed check loss).
double smooth_step_integral(double u);

/// Smoothed quantile-regression moments on observations [y, x]:
/// g = x [H((y - x^T theta)/h) + tau - 1]. The bandwidth h travels in the
/// batch aux channel; by default h = sqrt(p / N_prev), with the first
/// batch using its own size.
class SmoothedQuantileMoment final : public core::MomentModel {
 public:
  SmoothedQuantileMoment(Index p, double tau);

  Index num_params() const override { return p_; }
  Index num_moments() const override { return p_; }
  Index obs_dim() const override { return p_ + 1; }
  std::string name() const override { return "sqr"; }
  double tau() const { return tau_; }

  Vector moment(const VectorCRef& theta, const VectorCRef& obs, double h) const override;
  Matrix gradient(const VectorCRef& theta, const VectorCRef& obs, double h) const override;
  core::BatchMoments evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const override;
  std::optional<double> batch_aux(std::size_t n_before, std::size_t n_batch) const override;

  static double bandwidth(Index p, std::size_t n) { return std::sqrt(static_cast<double>(p) / static_cast<double>(n)); }

 private:
  Index p_;
  double tau_;
};

struct LeqrConfig {
  double tau = 0.5;
  /// Memory constraint m that sets the interval schedule.
  double m = 2000.0;
};

/// Interval-scheduled linear estimator for quantile regression used as a
/// comparison baseline. Observations are split into intervals starting at
/// b_l = floor(m^{c_{l-1}}) + 1 with c_{2k-1} = 2^{k-1} + 1/2 and
/// c_{2k} = 2^{k-1} + 3/4. The linearization point changes only at interval
/// boundaries; within interval l >= 2 the estimate combines the summary
/// statistics of intervals l-1 and l:
///   theta = (V_{l-1} + V_l)^{-1} (U_{l-1} + U_l),
///   V = sum x x^T H'(r/h)/h,  U = sum x [H(r/h) + tau - 1 + (y/h) H'(r/h)].
/// Inside the first interval the initial estimate is reported.
class Leqr {
 public:
  Leqr(Index p, LeqrConfig cfg, Vector theta_init, std::size_t n_init);

  /// Consumes rows [y, x]; the first call normally contains the data that
  /// produced theta_init.
  void push(const MatrixCRef& rows);
  const Vector& estimate() const { return estimate_; }
  std::size_t count() const { return n_; }
  std::size_t interval() const { return interval_; }

  /// First (1-based) observation index of interval l.
  static std::size_t interval_start(std::size_t l, double m);

 private:
  void start_interval();
  void absorb(const MatrixCRef& rows);
  void refresh_estimate();

  Index p_;
  LeqrConfig cfg_;
  std::size_t n_init_;
  std::size_t n_ = 0;
  std::size_t interval_ = 1;
  std::size_t next_start_;
  double h_;
  Vector anchor_;  // linearization point for the current interval
  Vector estimate_;
  Matrix v_prev_, v_cur_;
  Vector u_prev_, u_cur_;
};

}  // namespace ogmm::moments
