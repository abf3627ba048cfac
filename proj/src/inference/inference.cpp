#include "ogmm/inference/inference.hpp"

#include "ogmm/core/linalg.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/inference/distributions.hpp"
#include "ogmm/lrv/bartlett.hpp"
#include "ogmm/lrv/pd_adjust.hpp"

#include <cmath>

namespace ogmm::inference {

bool TestReport::rejects(double alpha) const {
  const auto it = reject_at.find(alpha);
  if (it != reject_at.end()) return it->second;
  return statistic > chisq_quantile(1.0 - alpha, df);
}

nlohmann::json TestReport::to_json() const {
  nlohmann::json rej = nlohmann::json::object();
  for (const auto& [alpha, r] : reject_at) rej[std::to_string(alpha)] = r;
  return {{"statistic", statistic}, {"df", df}, {"p_value", p_value}, {"reject_at", rej}};
}

TestReport make_report(double statistic, int df, const std::vector<double>& alphas) {
  if (!std::isfinite(statistic)) throw NumericError("test statistic is not finite");
  if (df < 1) throw DomainError("test degrees of freedom must be positive");
  TestReport r;
  r.statistic = std::max(statistic, 0.0);
  r.df = df;
  r.p_value = chisq_sf(r.statistic, df);
  for (double a : alphas) r.reject_at[a] = r.statistic > chisq_quantile(1.0 - a, df);
  return r;
}

TestReport sargan_hansen(const core::OgmmState& state, const MatrixCRef& sigma, const std::vector<double>& alphas) {
  const Index q = state.Uprime.size(), p = state.theta.size();
  if (q == p) throw ExactIdentification("Sargan-Hansen test needs more moments than parameters");
  const double stat = static_cast<double>(state.N) * core::inverse_quadratic(sigma, state.Uprime);
  return make_report(stat, static_cast<int>(q - p), alphas);
}

double ConfidenceRegion::statistic(const VectorCRef& theta) const {
  const Vector d = center - theta;
  return static_cast<double>(N) * d.dot(shape * d);
}

Matrix efficient_covariance(const MatrixCRef& v, const MatrixCRef& sigma) {
  Matrix info = v.transpose() * core::spd_solve(sigma, v);
  info = 0.5 * (info + info.transpose());
  Eigen::LLT<Matrix> llt(info);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw RankDeficient("V^T Sigma^{-1} V is not positive definite");
  Matrix cov = llt.solve(Matrix::Identity(info.rows(), info.cols()));
  return 0.5 * (cov + cov.transpose());
}

Matrix sandwich_covariance(const MatrixCRef& v, const MatrixCRef& w, const MatrixCRef& sigma) {
  Matrix a = v.transpose() * w * v;
  a = 0.5 * (a + a.transpose());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw RankDeficient("V^T W V is not positive definite");
  const Matrix bread = llt.solve(Matrix(v.transpose() * w));
  Matrix cov = bread * sigma * bread.transpose();
  return 0.5 * (cov + cov.transpose());
}

ConfidenceRegion confidence_region(const core::OgmmState& state, const MatrixCRef& sigma, double alpha) {
  ConfidenceRegion r;
  r.center = state.theta;
  Matrix shape = state.Vprime.transpose() * core::spd_solve(sigma, state.Vprime);
  r.shape = 0.5 * (shape + shape.transpose());
  Eigen::LLT<Matrix> llt(r.shape);
  if (llt.info() != Eigen::Success) throw RankDeficient("V^T Sigma^{-1} V is not positive definite");
  r.alpha = alpha;
  r.N = state.N;
  r.critical = chisq_quantile(1.0 - alpha, static_cast<double>(state.theta.size()));
  return r;
}

std::pair<double, double> marginal_interval(const core::OgmmState& state, const MatrixCRef& sigma, Index coord,
                                            double alpha) {
  if (coord < 0 || coord >= state.theta.size()) throw DimensionError("marginal_interval: coordinate out of range");
  const Matrix cov = efficient_covariance(state.Vprime, sigma);
  const double half = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(cov(coord, coord) / static_cast<double>(state.N));
  return {state.theta(coord) - half, state.theta(coord) + half};
}

std::pair<double, double> linear_interval(const core::OgmmState& state, const MatrixCRef& sigma, const VectorCRef& j,
                                          double alpha, const Matrix* weight) {
  if (j.size() != state.theta.size()) throw DimensionError("linear_interval: combination has the wrong dimension");
  const Matrix cov = weight ? sandwich_covariance(state.Vprime, *weight, sigma) : efficient_covariance(state.Vprime, sigma);
  const double center = j.dot(state.theta);
  const double half = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(j.dot(cov * j) / static_cast<double>(state.N));
  return {center - half, center + half};
}

AnomalySnapshot AnomalySnapshot::from_state(const core::OgmmState& state, std::optional<Matrix> sigma) {
  AnomalySnapshot s;
  auto [u, v] = core::direct_form_state(state);
  s.U1 = std::move(u);
  s.V1 = std::move(v);
  s.theta1 = state.theta;
  s.Sigma1 = sigma ? std::move(*sigma) : state.weighting.variance();
  s.n1 = state.N;
  return s;
}

TestReport anomaly_tf(const AnomalySnapshot& ref, const core::OgmmState& updated, const core::MomentModel& model,
                      const core::Batch& db_in, const std::vector<double>& alphas) {
  if (ref.n1 == 0) throw DomainError("anomaly reference is empty");
  const Index p = model.num_params(), q = model.num_moments();
  const Vector& theta_f = updated.theta;
  const core::Batch db = model.prepare(db_in, ref.n1);
  const Vector g = model.evaluate(theta_f, db, false).g_sum;
  const Vector ref_moment = ref.U1 + ref.V1 * theta_f;
  const double stat = static_cast<double>(ref.n1) * core::inverse_quadratic(ref.Sigma1, ref_moment) +
                      core::inverse_quadratic(ref.Sigma1, g) / static_cast<double>(db.size());
  return make_report(stat, static_cast<int>(2 * q - p), alphas);
}

std::pair<TestReport, core::OgmmState> anomaly_tf_update(const core::OgmmState& reference,
                                                         const core::MomentModel& model, const core::Batch& db,
                                                         const std::vector<double>& alphas) {
  const AnomalySnapshot ref = AnomalySnapshot::from_state(reference);
  core::OgmmState updated = core::update_batch(reference, model, db, core::UpdateOptions{false});
  TestReport report = anomaly_tf(ref, updated, model, db, alphas);
  return {std::move(report), std::move(updated)};
}

TestReport anomaly_tu(const AnomalySnapshot& ref, const core::MomentModel& model, const core::Batch& db_in,
                      const UnrestrictedFit& fit, const std::vector<double>& alphas) {
  const Index p = model.num_params(), q = model.num_moments();
  if (q <= p) throw ExactIdentification("stability statistic needs more moments than parameters");
  const core::Batch db = model.prepare(db_in, ref.n1);
  offline::TwoStepOptions opts = fit.gmm;
  if (!opts.theta_start) opts.theta_start = ref.theta1;
  const offline::TwoStepResult res = offline::twostep_gmm(model, db, opts);
  const Matrix rows = model.moment_rows(res.theta, db);
  const Matrix sigma_u = offline::moment_variance(rows, fit.lrv, fit.klrv);
  const Vector g = rows.colwise().sum().transpose();
  const Vector ref_moment = ref.U1 + ref.V1 * ref.theta1;
  const double stat = static_cast<double>(ref.n1) * core::inverse_quadratic(ref.Sigma1, ref_moment) +
                      core::inverse_quadratic(sigma_u, g) / static_cast<double>(db.size());
  return make_report(stat, static_cast<int>(2 * (q - p)), alphas);
}

TestReport anomaly_tr(const core::Batch& d1_in, const core::Batch& db_in, const core::MomentModel& model,
                      std::optional<Vector> theta_start, const std::vector<double>& alphas) {
  const Index p = model.num_params(), q = model.num_moments();
  d1_in.validate(model.obs_dim());
  db_in.validate(model.obs_dim());
  const core::Batch d1 = model.prepare(d1_in, 0);
  const core::Batch db = model.prepare(db_in, 0);
  const double n1 = static_cast<double>(d1.size()), nb = static_cast<double>(db.size());

  // Stacked residual [G(D1)/sqrt(n1); G(Db)/sqrt(nb)] so that a block
  // weight diag(C1^{-1}, Cb^{-1}) reproduces the restricted objective.
  const offline::ResidualFn fn = [&](const Vector& theta, Vector& m, Matrix& jac) {
    const core::BatchMoments a = model.evaluate(theta, d1, false);
    const core::BatchMoments b = model.evaluate(theta, db, false);
    m.resize(2 * q);
    jac.resize(2 * q, p);
    m.head(q) = a.g_sum / std::sqrt(n1);
    m.tail(q) = b.g_sum / std::sqrt(nb);
    jac.topRows(q) = a.grad_sum / std::sqrt(n1);
    jac.bottomRows(q) = b.grad_sum / std::sqrt(nb);
  };
  const Vector start = theta_start ? *theta_start : Vector::Zero(p);
  const Vector pooled = offline::gauss_newton(fn, start, Matrix::Identity(2 * q, 2 * q)).theta;

  Matrix w = Matrix::Zero(2 * q, 2 * q);
  w.topLeftCorner(q, q) = core::spd_inverse(lrv::pd_adjust(lrv::sample_covariance(model.moment_rows(pooled, d1))));
  w.bottomRightCorner(q, q) = core::spd_inverse(lrv::pd_adjust(lrv::sample_covariance(model.moment_rows(pooled, db))));
  const offline::GaussNewtonResult res = offline::gauss_newton(fn, pooled, w);
  return make_report(res.objective, static_cast<int>(2 * q - p), alphas);
}

}  // namespace ogmm::inference
