#include "ogmm/sgmm/sgmm.hpp"

#include "ogmm/core/linalg.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/inference/distributions.hpp"
#include "ogmm/lrv/pd_adjust.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ogmm::sgmm {

namespace {

// (V^T W V)^{-1} V^T W, the p x q map from moments to parameter steps.
Matrix step_map(const MatrixCRef& v, const MatrixCRef& w) {
  Matrix a = v.transpose() * w * v;
  a = 0.5 * (a + a.transpose());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) throw SingularSystem("SGMM: V^T W V is singular");
  return llt.solve(Matrix(v.transpose() * w));
}

}  // namespace

double select_learning_rate(const core::MomentModel& model, const core::Batch& d0_in, const VectorCRef& theta0,
                            const MatrixCRef& v0, const MatrixCRef& w0, double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw DomainError("kappa must lie in [0,1]");
  const core::Batch d0 = model.prepare(d0_in, 0);
  const Matrix map = step_map(v0, w0);
  const double aux = d0.aux_or_zero();
  const double p = static_cast<double>(model.num_params());
  std::vector<double> norms(static_cast<std::size_t>(d0.size()));
  for (Index i = 0; i < d0.size(); ++i) {
    const Matrix m = map * model.gradient(theta0, d0.obs.row(i).transpose(), aux);
    norms[static_cast<std::size_t>(i)] = Eigen::JacobiSVD<Matrix>(m).singularValues()(0) / p;
  }
  const std::size_t idx = static_cast<std::size_t>(std::floor(kappa * static_cast<double>(norms.size() - 1)));
  std::nth_element(norms.begin(), norms.begin() + static_cast<std::ptrdiff_t>(idx), norms.end());
  const double psi0 = norms[idx];
  if (!(psi0 > 0.0) || !std::isfinite(psi0)) throw DegenerateScale("SGMM learning-rate scale is zero");
  return 1.0 / psi0;
}

Sgmm::Sgmm(const core::MomentModel& model, const core::Batch& d0_in, Vector theta0, SgmmConfig cfg)
    : model_(&model), cfg_(cfg), p_(model.num_params()), q_(model.num_moments()), theta_(std::move(theta0)) {
  if (theta_.size() != p_) throw DimensionError("SGMM: initial estimate has the wrong dimension");
  if (!(cfg_.a > 0.5 && cfg_.a < 1.0)) throw DomainError("SGMM: a must lie in (1/2, 1)");
  d0_in.validate(model.obs_dim());
  const core::Batch d0 = model.prepare(d0_in, 0);
  const core::BatchMoments bm = model.evaluate(theta_, d0, true);
  count_ = static_cast<std::size_t>(d0.size());
  v_sum_ = bm.grad_sum;
  v_ = v_sum_ / static_cast<double>(count_);
  const Matrix s0 = lrv::pd_adjust(bm.rows.transpose() * bm.rows / static_cast<double>(count_));
  p_inv_ = core::spd_inverse(s0) / static_cast<double>(count_);

  eta0_ = cfg_.eta0 ? *cfg_.eta0 : select_learning_rate(model, d0, theta_, v_, w_second_moment(), cfg_.kappa);
  if (!(eta0_ >= 0.0)) throw DomainError("SGMM: eta0 must be non-negative");
  theta_bar_ = Vector::Zero(p_);
  g_sum_ = Vector::Zero(q_);
  if (cfg_.use_klrv) klrv_.emplace(q_, cfg_.klrv);
}

Matrix Sgmm::w_check() const { return w_klrv_ ? *w_klrv_ : w_second_moment(); }

void Sgmm::step(const VectorCRef& x, double aux) {
  const Vector g = model_->moment(theta_, x, aux);
  const Matrix grad = model_->gradient(theta_, x, aux);
  const double eta = eta0_ * std::pow(static_cast<double>(k_ + 1), -cfg_.a);
  Vector next = theta_;
  if (eta > 0.0) next -= eta * (step_map(v_, w_check()) * g);
  if (!next.allFinite()) throw NonFiniteUpdate("SGMM step produced a non-finite estimate");

  // Sherman-Morrison update of (S + g g^T)^{-1}.
  const Vector pg = p_inv_ * g;
  p_inv_ -= (pg * pg.transpose()) / (1.0 + g.dot(pg));
  p_inv_ = 0.5 * (p_inv_ + p_inv_.transpose());
  v_sum_ += grad;
  ++count_;
  v_ = v_sum_ / static_cast<double>(count_);
  if (klrv_) klrv_->push(g);

  theta_ = std::move(next);
  ++k_;
  theta_bar_ += (theta_ - theta_bar_) / static_cast<double>(k_);
  g_sum_ += model_->moment(theta_bar_, x, aux);
}

void Sgmm::push(const core::Batch& batch_in) {
  batch_in.validate(model_->obs_dim());
  const core::Batch batch = model_->prepare(batch_in, k_);
  const double aux = batch.aux_or_zero();
  for (Index i = 0; i < batch.size(); ++i) step(batch.obs.row(i).transpose(), aux);
}

void Sgmm::refresh_weighting() {
  if (klrv_ && klrv_->ready()) w_klrv_ = core::spd_inverse(klrv_->query());
}

Matrix Sgmm::sigma() const {
  if (klrv_) return klrv_->query();
  return core::spd_inverse(w_second_moment());
}

inference::TestReport Sgmm::overident(const std::vector<double>& alphas) const {
  if (q_ == p_) throw ExactIdentification("SGMM over-identification test needs q > p");
  if (k_ == 0) throw Underflow("SGMM over-identification test needs at least one step");
  const Vector gb = g_bar();
  const double stat = static_cast<double>(k_) * (klrv_ ? core::inverse_quadratic(sigma(), gb) : gb.dot(w_check() * gb));
  return inference::make_report(stat, static_cast<int>(q_ - p_), alphas);
}

std::pair<double, double> Sgmm::marginal_interval(Index coord, double alpha) const {
  Vector j = Vector::Zero(p_);
  j(coord) = 1.0;
  return linear_interval(j, alpha);
}

std::pair<double, double> Sgmm::linear_interval(const VectorCRef& j, double alpha) const {
  const Matrix cov = inference::efficient_covariance(v_, sigma());
  const double center = j.dot(theta_bar_);
  const double half =
      inference::normal_quantile(1.0 - alpha / 2.0) * std::sqrt(j.dot(cov * j) / static_cast<double>(k_));
  return {center - half, center + half};
}

}  // namespace ogmm::sgmm
