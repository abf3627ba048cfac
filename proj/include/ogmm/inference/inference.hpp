#pragma once

#include "ogmm/core/batch.hpp"
#include "ogmm/core/estimator.hpp"
#include "ogmm/core/moment_model.hpp"
#include "ogmm/offline/offline.hpp"
#include "ogmm/types.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace ogmm::inference {

/// Outcome of a chi-square test: p_value = 1 - F(statistic; df) and
/// reject_at[alpha] <=> statistic > F^{-1}(1 - alpha; df).
struct TestReport {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::map<double, bool> reject_at;

  bool rejects(double alpha) const;
  nlohmann::json to_json() const;
};

/// Builds a report; reject_at is filled for every level in `alphas`.
TestReport make_report(double statistic, int df, const std::vector<double>& alphas = {0.01, 0.05, 0.10});

/// Online over-identification test N U'^T Sigma^{-1} U' with q - p degrees
/// of freedom. Throws ExactIdentification when q == p.
TestReport sargan_hansen(const core::OgmmState& state, const MatrixCRef& sigma,
                         const std::vector<double>& alphas = {0.01, 0.05, 0.10});

/// Ellipsoid {theta : N (center - theta)^T shape (center - theta) <= crit}
/// with shape = V^T Sigma^{-1} V.
struct ConfidenceRegion {
  Vector center;
  Matrix shape;
  double alpha = 0.05;
  std::size_t N = 0;
  double critical = 0.0;  // chi-square (1 - alpha) quantile with p df

  double statistic(const VectorCRef& theta) const;
  bool contains(const VectorCRef& theta) const { return statistic(theta) <= critical; }
};

/// Asymptotic covariance (V^T Sigma^{-1} V)^{-1} of sqrt(N)(theta_hat - theta*),
/// valid when W is a consistent estimate of Sigma^{-1}. Throws RankDeficient.
Matrix efficient_covariance(const MatrixCRef& v, const MatrixCRef& sigma);

/// General sandwich (V^T W V)^{-1} V^T W Sigma W V (V^T W V)^{-1} for an
/// arbitrary weighting matrix W.
Matrix sandwich_covariance(const MatrixCRef& v, const MatrixCRef& w, const MatrixCRef& sigma);

ConfidenceRegion confidence_region(const core::OgmmState& state, const MatrixCRef& sigma, double alpha);

/// theta_j +- z_{1-alpha/2} sqrt([cov]_jj / N) with cov = efficient_covariance.
std::pair<double, double> marginal_interval(const core::OgmmState& state, const MatrixCRef& sigma, Index coord,
                                            double alpha);

/// Interval for the linear combination J^T theta. When `weight` is given
/// the sandwich covariance for that weighting is used.
std::pair<double, double> linear_interval(const core::OgmmState& state, const MatrixCRef& sigma, const VectorCRef& j,
                                          double alpha, const Matrix* weight = nullptr);

/// Reference summary for the anomaly statistics: direct-form U1, V1 at
/// theta1, the long-run variance Sigma1 and the sample size n1.
struct AnomalySnapshot {
  Vector U1;
  Matrix V1;
  Vector theta1;
  Matrix Sigma1;
  std::size_t n1 = 0;

  /// Reference built from an estimator state; Sigma defaults to the
  /// state's weighting variance estimate.
  static AnomalySnapshot from_state(const core::OgmmState& state, std::optional<Matrix> sigma = std::nullopt);
};

/// Full-sample statistic with 2q - p degrees of freedom:
///   n1 (U1 + V1 tF)^T S1^{-1} (U1 + V1 tF) + n_b^{-1} G(tF; Db)^T S1^{-1} G(tF; Db),
/// where tF is the estimate in `updated` (the reference state after an
/// OGMM update with Db).
TestReport anomaly_tf(const AnomalySnapshot& ref, const core::OgmmState& updated, const core::MomentModel& model,
                      const core::Batch& db, const std::vector<double>& alphas = {0.01, 0.05, 0.10});

/// Convenience: performs the OGMM update of `reference` with Db (weighting
/// left untouched) and evaluates anomaly_tf. Returns the report and the
/// updated state so callers can fold accepted batches in.
std::pair<TestReport, core::OgmmState> anomaly_tf_update(const core::OgmmState& reference,
                                                         const core::MomentModel& model, const core::Batch& db,
                                                         const std::vector<double>& alphas = {0.01, 0.05, 0.10});

struct UnrestrictedFit {
  offline::TwoStepOptions gmm{};
  /// Long-run variance of the batch moments at the batch-only estimate.
  offline::LrvChoice lrv = offline::LrvChoice::SampleCovariance;
  lrv::KernelLrvConfig klrv{};
};

/// Stability statistic with 2(q - p) degrees of freedom:
///   n1 (U1 + V1 theta1)^T S1^{-1} (U1 + V1 theta1) + n_b^{-1} G(tU; Db)^T SU^{-1} G(tU; Db),
/// where tU and SU come from an offline GMM fit on Db alone.
TestReport anomaly_tu(const AnomalySnapshot& ref, const core::MomentModel& model, const core::Batch& db,
                      const UnrestrictedFit& fit = {}, const std::vector<double>& alphas = {0.01, 0.05, 0.10});

/// Offline restricted statistic on two stored batches, 2q - p degrees of
/// freedom. Two-step: a pooled identity-weighted fit, per-batch sample
/// covariances C1, Cb of the moments at that fit, then the minimizer of
///   n1^{-1} G(t; D1)^T C1^{-1} G(t; D1) + n_b^{-1} G(t; Db)^T Cb^{-1} G(t; Db),
/// whose minimum is the statistic.
TestReport anomaly_tr(const core::Batch& d1, const core::Batch& db, const core::MomentModel& model,
                      std::optional<Vector> theta_start = std::nullopt,
                      const std::vector<double>& alphas = {0.01, 0.05, 0.10});

}  // namespace ogmm::inference
