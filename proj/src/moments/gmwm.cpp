#include "ogmm/moments/gmwm.hpp"

#include "ogmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ogmm::moments {

namespace {

void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("AR(1) coefficient must lie in (0,1)");
}

}  // namespace

double ar1_wavelet_variance(double rho, double sigma2, double tau) {
  check_rho(rho);
  const double num = 0.5 * tau - 3.0 * rho - 0.5 * tau * rho * rho + 4.0 * std::pow(rho, 1.0 + 0.5 * tau) -
                     std::pow(rho, 1.0 + tau);
  const double den = 0.5 * tau * tau * (1.0 - rho) * (1.0 - rho) * (1.0 - rho * rho);
  return sigma2 * num / den;
}

double ar1_wavelet_variance_drho(double rho, double sigma2, double tau) {
  check_rho(rho);
  const double num = 0.5 * tau - 3.0 * rho - 0.5 * tau * rho * rho + 4.0 * std::pow(rho, 1.0 + 0.5 * tau) -
                     std::pow(rho, 1.0 + tau);
  const double dnum =
      -3.0 - tau * rho + 4.0 * (1.0 + 0.5 * tau) * std::pow(rho, 0.5 * tau) - (1.0 + tau) * std::pow(rho, tau);
  const double den = 0.5 * tau * tau * (1.0 - rho) * (1.0 - rho) * (1.0 - rho * rho);
  const double dden = -tau * tau * (1.0 - rho) * (1.0 - rho) * (1.0 + 2.0 * rho);
  return sigma2 * (dnum * den - num * dden) / (den * den);
}

GmwmMoment::GmwmMoment(int ar_components, Index levels, double scale)
    : k_(ar_components), q_(levels), scale_(scale) {
  if (k_ < 1 || k_ > 3) throw DomainError("GmwmMoment: between one and three AR(1) components");
  if (q_ < 2 * k_ + 1) throw DimensionError("GmwmMoment: need at least as many levels as parameters");
  if (!(scale > 0.0)) throw DomainError("GmwmMoment: scale must be positive");
}

void GmwmMoment::check_theta(const VectorCRef& theta) const {
  if (theta.size() != num_params()) throw DimensionError("GmwmMoment: parameter dimension mismatch");
}

double GmwmMoment::nu(const VectorCRef& theta, Index j) const {
  check_theta(theta);
  if (j < 1 || j > q_) throw DomainError("GmwmMoment: level out of range");
  const double tau = std::ldexp(1.0, static_cast<int>(j));
  double out = theta(2 * k_) / tau;
  for (int i = 0; i < k_; ++i) out += ar1_wavelet_variance(theta(2 * i), theta(2 * i + 1), tau);
  return out;
}

Vector GmwmMoment::nu_all(const VectorCRef& theta) const {
  Vector out(q_);
  for (Index j = 1; j <= q_; ++j) out(j - 1) = nu(theta, j);
  return out;
}

Matrix GmwmMoment::nu_jacobian(const VectorCRef& theta) const {
  check_theta(theta);
  Matrix jac(q_, num_params());
  for (Index j = 1; j <= q_; ++j) {
    const double tau = std::ldexp(1.0, static_cast<int>(j));
    for (int i = 0; i < k_; ++i) {
      const double rho = theta(2 * i);
      jac(j - 1, 2 * i) = ar1_wavelet_variance_drho(rho, theta(2 * i + 1), tau);
      jac(j - 1, 2 * i + 1) = ar1_wavelet_variance(rho, 1.0, tau);
    }
    jac(j - 1, 2 * k_) = 1.0 / tau;
  }
  return jac;
}

Vector GmwmMoment::moment(const VectorCRef& theta, const VectorCRef& obs, double) const {
  return scale_ * (obs.array().square().matrix() - nu_all(theta));
}

Matrix GmwmMoment::gradient(const VectorCRef& theta, const VectorCRef&, double) const {
  return -scale_ * nu_jacobian(theta);
}

core::BatchMoments GmwmMoment::evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const {
  const double n = static_cast<double>(batch.size());
  const Vector nu_vec = nu_all(theta);
  const Matrix sq = batch.obs.array().square().matrix();
  core::BatchMoments out;
  out.g_sum = scale_ * (sq.colwise().sum().transpose() - n * nu_vec);
  out.grad_sum = -scale_ * n * nu_jacobian(theta);
  if (want_rows) out.rows = scale_ * (sq.rowwise() - nu_vec.transpose());
  return out;
}

std::pair<Vector, Vector> GmwmMoment::box(const GmwmBounds& bounds) const {
  Vector lo(num_params()), hi(num_params());
  for (int i = 0; i < k_; ++i) {
    lo(2 * i) = bounds.rho_lo;
    hi(2 * i) = bounds.rho_hi;
    lo(2 * i + 1) = bounds.sigma2_lo;
    hi(2 * i + 1) = bounds.sigma2_hi;
  }
  lo(2 * k_) = bounds.sigma2_lo;
  hi(2 * k_) = bounds.sigma2_hi;
  return {lo, hi};
}

Vector GmwmMoment::canonical(const VectorCRef& theta) const {
  check_theta(theta);
  std::vector<int> order(static_cast<std::size_t>(k_));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return theta(2 * a) > theta(2 * b); });
  Vector out = theta;
  for (int i = 0; i < k_; ++i) out.segment(2 * i, 2) = theta.segment(2 * order[static_cast<std::size_t>(i)], 2);
  return out;
}

Vector GmwmMoment::project(const VectorCRef& theta, const GmwmBounds& bounds) const {
  check_theta(theta);
  const auto [lo, hi] = box(bounds);
  return theta.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace ogmm::moments
