#pragma once

#include "ogmm/core/batch.hpp"
#include "ogmm/core/moment_model.hpp"
#include "ogmm/inference/inference.hpp"
#include "ogmm/lrv/kernel_lrv.hpp"
#include "ogmm/types.hpp"

#include <optional>

namespace ogmm::sgmm {

struct SgmmConfig {
  double a = 0.501;     // learning-rate decay eta_k = eta0 k^{-a}
  double kappa = 0.5;   // quantile level for the learning-rate rule
  std::optional<double> eta0;  // overrides the rule when set
  /// Use the kernel long-run variance (instead of the raw second moment)
  /// for inference and, after each refresh_weighting(), for the step.
  bool use_klrv = false;
  lrv::KernelLrvConfig klrv{};
};

/// Initial learning rate 1 / Psi0(kappa), where Psi0 is the lower
/// kappa-quantile over x in D0 of p^{-1} || (V^T W V)^{-1} V^T W grad g(theta0, x) ||_2.
/// Throws DegenerateScale when that quantile is zero.
double select_learning_rate(const core::MomentModel& model, const core::Batch& d0, const VectorCRef& theta0,
                            const MatrixCRef& v0, const MatrixCRef& w0, double kappa);

/// Stochastic GMM with per-observation updates
///   theta_{k+1} = theta_k - eta_{k+1} (V^T W V)^{-1} V^T W g(theta_k, x_{k+1}),
/// Polyak averaging of the iterates, a running Jacobian average, and the
/// inverse second moment of the moments maintained by Sherman-Morrison.
/// Initialization statistics come from D0.
class Sgmm {
 public:
  Sgmm(const core::MomentModel& model, const core::Batch& d0, Vector theta0, SgmmConfig cfg = {});

  /// One stochastic step with observation x (aux: moment auxiliary value).
  void step(const VectorCRef& x, double aux = 0.0);
  /// Steps through every row of the batch in order.
  void push(const core::Batch& batch);
  /// Re-inverts the kernel long-run variance for use in the steps.
  void refresh_weighting();

  const Vector& theta_check() const { return theta_; }
  const Vector& theta_bar() const { return theta_bar_; }
  const Matrix& v_check() const { return v_; }
  /// Current weighting: inverse second moment (or the refreshed kernel
  /// inverse when use_klrv is set).
  Matrix w_check() const;
  /// Inverse of the mean second moment, (S / count)^{-1}.
  Matrix w_second_moment() const { return static_cast<double>(count_) * p_inv_; }
  double eta0() const { return eta0_; }
  std::size_t k() const { return k_; }
  Vector g_bar() const { return g_sum_ / static_cast<double>(k_); }

  /// Variance used for inference: kernel LRV when enabled, otherwise the
  /// mean second moment of the moments.
  Matrix sigma() const;

  /// N g_bar^T W g_bar with q - p degrees of freedom.
  inference::TestReport overident(const std::vector<double>& alphas = {0.01, 0.05, 0.10}) const;

  std::pair<double, double> marginal_interval(Index coord, double alpha) const;
  std::pair<double, double> linear_interval(const VectorCRef& j, double alpha) const;

 private:
  const core::MomentModel* model_;
  SgmmConfig cfg_;
  Index p_, q_;
  double eta0_ = 0.0;
  std::size_t k_ = 0;       // stochastic steps taken
  std::size_t count_ = 0;   // observations behind V and the second moment
  Vector theta_, theta_bar_, g_sum_;
  Matrix v_sum_, v_;
  Matrix p_inv_;  // inverse of the unnormalized second-moment sum
  std::optional<lrv::KernelLrv> klrv_;
  std::optional<Matrix> w_klrv_;
};

}  // namespace ogmm::sgmm
