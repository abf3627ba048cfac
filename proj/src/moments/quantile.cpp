#include "ogmm/moments/quantile.hpp"

#include "ogmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ogmm::moments {

double smooth_step(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double u2 = u * u;
  return 0.5 + 15.0 / 16.0 * u * (1.0 - 2.0 * u2 / 3.0 + u2 * u2 / 5.0);
}

double smooth_step_derivative(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double w = 1.0 - u * u;
  return 15.0 / 16.0 * w * w;
}

double smooth_step_integral(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return u;
  const double u2 = u * u;
  return 0.5 * (u + 1.0) + 15.0 / 16.0 * ((u2 - 1.0) / 2.0 - (u2 * u2 - 1.0) / 6.0 + (u2 * u2 * u2 - 1.0) / 30.0);
}

SmoothedQuantileMoment::SmoothedQuantileMoment(Index p, double tau) : p_(p), tau_(tau) {
  if (p < 1) throw DimensionError("SmoothedQuantileMoment: p must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("SmoothedQuantileMoment: tau must lie in (0,1)");
}

Vector SmoothedQuantileMoment::moment(const VectorCRef& theta, const VectorCRef& obs, double h) const {
  const auto x = obs.tail(p_);
  const double u = (obs(0) - x.dot(theta)) / h;
  return x * (smooth_step(u) + tau_ - 1.0);
}

Matrix SmoothedQuantileMoment::gradient(const VectorCRef& theta, const VectorCRef& obs, double h) const {
  const auto x = obs.tail(p_);
  const double u = (obs(0) - x.dot(theta)) / h;
  return -(smooth_step_derivative(u) / h) * (x * x.transpose());
}

core::BatchMoments SmoothedQuantileMoment::evaluate(const VectorCRef& theta, const core::Batch& batch,
                                                    bool want_rows) const {
  if (!batch.aux || !(*batch.aux > 0.0)) throw DomainError("SmoothedQuantileMoment: batch bandwidth is not set");
  const double h = *batch.aux;
  const auto y = batch.obs.col(0);
  const auto x = batch.obs.rightCols(p_);
  const Vector u = (y - x * theta) / h;
  Vector level(u.size()), slope(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    level(i) = smooth_step(u(i)) + tau_ - 1.0;
    slope(i) = smooth_step_derivative(u(i)) / h;
  }
  core::BatchMoments out;
  out.g_sum = x.transpose() * level;
  out.grad_sum = -(x.transpose() * (x.array().colwise() * slope.array()).matrix());
  if (want_rows) out.rows = x.array().colwise() * level.array();
  return out;
}

std::optional<double> SmoothedQuantileMoment::batch_aux(std::size_t n_before, std::size_t n_batch) const {
  return bandwidth(p_, n_before > 0 ? n_before : n_batch);
}

std::size_t Leqr::interval_start(std::size_t l, double m) {
  if (l <= 1) return 1;
  const std::size_t idx = l - 1;  // c_idx
  const std::size_t k = (idx + 1) / 2;
  const double c = std::ldexp(1.0, static_cast<int>(k) - 1) + (idx % 2 == 1 ? 0.5 : 0.75);
  const double v = std::floor(std::pow(m, c));
  if (!(v < 9e18)) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(v) + 1;
}

Leqr::Leqr(Index p, LeqrConfig cfg, Vector theta_init, std::size_t n_init)
    : p_(p),
      cfg_(cfg),
      n_init_(n_init),
      anchor_(std::move(theta_init)),
      v_prev_(Matrix::Zero(p, p)),
      v_cur_(Matrix::Zero(p, p)),
      u_prev_(Vector::Zero(p)),
      u_cur_(Vector::Zero(p)) {
  if (anchor_.size() != p) throw DimensionError("Leqr: initial estimate has the wrong dimension");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) throw DomainError("Leqr: tau must lie in (0,1)");
  if (!(cfg.m > 1.0) || n_init == 0) throw DomainError("Leqr: need m > 1 and a positive initial size");
  estimate_ = anchor_;
  next_start_ = interval_start(2, cfg_.m);
  h_ = SmoothedQuantileMoment::bandwidth(p_, n_init_);
}

void Leqr::start_interval() {
  // The estimate at the end of the finished interval becomes the new
  // linearization point; its statistics are kept for one more interval.
  if (interval_ > 1 || v_cur_.any()) refresh_estimate();
  anchor_ = estimate_;
  v_prev_ = v_cur_;
  u_prev_ = u_cur_;
  v_cur_.setZero();
  u_cur_.setZero();
  ++interval_;
  next_start_ = interval_start(interval_ + 1, cfg_.m);
  h_ = SmoothedQuantileMoment::bandwidth(p_, n_);
}

void Leqr::absorb(const MatrixCRef& rows) {
  const auto y = rows.col(0);
  const auto x = rows.rightCols(p_);
  const Vector u = (y - x * anchor_) / h_;
  Vector level(u.size()), slope(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    const double d = smooth_step_derivative(u(i)) / h_;
    slope(i) = d;
    level(i) = smooth_step(u(i)) + cfg_.tau - 1.0 + y(i) * d;
  }
  v_cur_.noalias() += x.transpose() * (x.array().colwise() * slope.array()).matrix();
  u_cur_.noalias() += x.transpose() * level;
  n_ += static_cast<std::size_t>(rows.rows());
}

void Leqr::refresh_estimate() {
  const Matrix v = v_prev_ + v_cur_;
  Eigen::LDLT<Matrix> ldlt(v);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) return;  // keep the previous estimate
  const Vector next = ldlt.solve(u_prev_ + u_cur_);
  if (next.allFinite()) estimate_ = next;
}

void Leqr::push(const MatrixCRef& rows) {
  if (rows.cols() != p_ + 1) throw DimensionError("Leqr::push: expected rows [y, x]");
  Index start = 0;
  while (start < rows.rows()) {
    // observations n_+1 .. next_start_-1 belong to the current interval
    const std::size_t room = next_start_ - 1 - n_;
    const Index take = static_cast<Index>(std::min<std::size_t>(room, static_cast<std::size_t>(rows.rows() - start)));
    if (take > 0) absorb(rows.middleRows(start, take));
    start += take;
    if (n_ + 1 == next_start_) start_interval();
  }
  if (interval_ >= 2) refresh_estimate();
}

}  // namespace ogmm::moments
