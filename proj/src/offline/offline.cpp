#include "ogmm/offline/offline.hpp"

#include "ogmm/core/linalg.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/lrv/bartlett.hpp"
#include "ogmm/lrv/pd_adjust.hpp"
#include "ogmm/moments/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ogmm::offline {

namespace {

Vector solve_full_rank(const Matrix& a, const Vector& b, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < a.cols()) throw RankDeficient(std::string(what) + ": system is rank deficient");
  return qr.solve(b);
}

Vector project(const Vector& theta, const GaussNewtonOptions& opts) {
  Vector out = theta;
  if (opts.lower) out = out.cwiseMax(*opts.lower);
  if (opts.upper) out = out.cwiseMin(*opts.upper);
  return out;
}

double quadratic(const Vector& m, const MatrixCRef& w) { return m.dot(w * m); }

}  // namespace

Vector tsls(const VectorCRef& y, const MatrixCRef& x, const MatrixCRef& z) {
  if (x.rows() != y.size() || z.rows() != y.size()) throw DimensionError("tsls: row counts differ");
  if (z.cols() < x.cols()) throw DimensionError("tsls: fewer instruments than regressors");
  Eigen::ColPivHouseholderQR<Matrix> qr_z(z);
  qr_z.setThreshold(1e-12);
  if (qr_z.rank() < z.cols()) throw RankDeficient("tsls: instruments are collinear");
  // Fitted regressors are the projection of X onto the column space of Z.
  const Matrix coef = qr_z.solve(Matrix(x));
  const Matrix x_hat = z * coef;
  return solve_full_rank(x_hat.transpose() * x_hat, x_hat.transpose() * y, "tsls");
}

Vector linear_gmm(const VectorCRef& y, const MatrixCRef& x, const MatrixCRef& z, const MatrixCRef& w) {
  if (x.rows() != y.size() || z.rows() != y.size()) throw DimensionError("linear_gmm: row counts differ");
  if (w.rows() != z.cols() || w.cols() != z.cols()) throw DimensionError("linear_gmm: weight has the wrong shape");
  const Matrix zx = z.transpose() * x;
  const Vector zy = z.transpose() * y;
  const Matrix a = zx.transpose() * w * zx;
  return solve_full_rank(0.5 * (a + a.transpose()), zx.transpose() * w * zy, "linear_gmm");
}

Vector tsls(const core::Batch& batch, Index p, Index q) {
  if (batch.width() != 1 + p + q) throw DimensionError("tsls: batch is not in the [y, x, z] layout");
  return tsls(batch.obs.col(0), batch.obs.middleCols(1, p), batch.obs.rightCols(q));
}

GaussNewtonResult gauss_newton(const ResidualFn& fn, Vector theta0, const MatrixCRef& w,
                               const GaussNewtonOptions& opts) {
  Vector theta = project(theta0, opts);
  Vector m;
  Matrix jac;
  fn(theta, m, jac);
  double f = quadratic(m, w);
  if (!std::isfinite(f)) throw OptimizerFailed("gauss_newton: objective is not finite at the start");

  Vector m_c;
  Matrix jac_c;
  for (int it = 1; it <= opts.max_iters; ++it) {
    // Jacobi column scaling: parameters of very different magnitudes
    // (e.g. AR coefficients next to innovation variances of 1e-8) would
    // otherwise let the ridge fallback of gmm_step swamp the small columns.
    const Matrix jwj = jac.transpose() * w * jac;
    Vector scale = jwj.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Index i = 0; i < scale.size(); ++i)
      if (!(scale(i) > 0.0) || !std::isfinite(scale(i))) scale(i) = 1.0;
    const Vector grad = jac.transpose() * (w * m);
    // Coordinates sitting on a bound with the gradient pointing outward are
    // held fixed; the Newton step is taken in the remaining ones.
    std::vector<Index> free;
    for (Index i = 0; i < theta.size(); ++i) {
      const bool at_lower = opts.lower && theta(i) <= (*opts.lower)(i) && grad(i) > 0.0;
      const bool at_upper = opts.upper && theta(i) >= (*opts.upper)(i) && grad(i) < 0.0;
      if (!at_lower && !at_upper) free.push_back(i);
    }
    std::vector<Vector> directions;
    if (!free.empty()) {
      Matrix jac_free(jac.rows(), static_cast<Index>(free.size()));
      for (std::size_t c = 0; c < free.size(); ++c) jac_free.col(static_cast<Index>(c)) = jac.col(free[c]) / scale(free[c]);
      try {
        const Vector step = core::gmm_step(jac_free, w, m);
        Vector dir = Vector::Zero(theta.size());
        for (std::size_t c = 0; c < free.size(); ++c) dir(free[c]) = -step(static_cast<Index>(c)) / scale(free[c]);
        directions.push_back(std::move(dir));
      } catch (const NumericError&) {
      }
    }
    directions.push_back(-grad.cwiseQuotient(scale.cwiseAbs2()) / double(grad.size()));

    bool accepted = false;
    Vector cand;
    double f_c = f;
    for (const Vector& dir : directions) {
      if (!dir.allFinite()) continue;
      double t = 1.0;
      for (int k = 0; k < 50 && !accepted; ++k, t *= 0.5) {
        cand = project(theta + t * dir, opts);
        try {
          fn(cand, m_c, jac_c);
        } catch (const DomainError&) {
          continue;
        }
        f_c = quadratic(m_c, w);
        if (std::isfinite(f_c) && f_c < f) accepted = true;
      }
      if (accepted) break;
    }
    if (!accepted) return {theta, f, it};  // no descent direction left: stationary to working precision

    const double decrease = f - f_c;
    const double moved = (cand - theta).cwiseProduct(scale).norm();
    theta = cand;
    m = m_c;
    jac = jac_c;
    f = f_c;
    if (!theta.allFinite()) throw OptimizerFailed("gauss_newton: iterate is not finite");
    if (decrease <= opts.tol * std::max(f, 1e-300) || moved <= opts.tol * (1.0 + theta.cwiseProduct(scale).norm()))
      return {theta, f, it};
  }
  throw OptimizerFailed("gauss_newton: iteration limit reached (objective " + std::to_string(f) + ")");
}

Matrix moment_variance(const MatrixCRef& rows, LrvChoice choice, const lrv::KernelLrvConfig& klrv) {
  switch (choice) {
    case LrvChoice::SampleCovariance:
      return lrv::pd_adjust(lrv::sample_covariance(rows));
    case LrvChoice::Bartlett:
      return lrv::pd_adjust(lrv::bartlett_offline(rows));
    case LrvChoice::Kernel: {
      lrv::KernelLrv k(rows.cols(), klrv);
      k.push_rows(rows);
      return k.query();
    }
  }
  throw DomainError("moment_variance: unknown estimator");
}

TwoStepResult twostep_gmm(const core::MomentModel& model, const core::Batch& data_in, const TwoStepOptions& opts) {
  data_in.validate(model.obs_dim());
  const core::Batch data = model.prepare(data_in, 0);
  const double n = static_cast<double>(data.size());
  const Index p = model.num_params(), q = model.num_moments();

  const ResidualFn fn = [&](const Vector& theta, Vector& m, Matrix& jac) {
    const core::BatchMoments bm = model.evaluate(theta, data, false);
    m = bm.g_sum / n;
    jac = bm.grad_sum / n;
  };
  const Vector start = opts.theta_start ? *opts.theta_start : Vector::Zero(p);
  if (start.size() != p) throw DimensionError("twostep_gmm: starting value has the wrong dimension");

  TwoStepResult out;
  const Matrix identity = Matrix::Identity(q, q);
  std::optional<GaussNewtonResult> best;
  std::string last_error;
  for (std::size_t i = 0; i <= opts.extra_starts.size(); ++i) {
    const Vector& s0 = i == 0 ? start : opts.extra_starts[i - 1];
    if (s0.size() != p) throw DimensionError("twostep_gmm: starting value has the wrong dimension");
    try {
      GaussNewtonResult r = gauss_newton(fn, s0, identity, opts.gn);
      if (!best || r.objective < best->objective) best = std::move(r);
    } catch (const NumericError& e) {
      if (opts.extra_starts.empty()) throw;
      last_error = e.what();
    }
  }
  if (!best) throw OptimizerFailed("twostep_gmm: every starting value failed (" + last_error + ")");
  out.theta_step1 = best->theta;
  out.sigma = moment_variance(model.moment_rows(out.theta_step1, data), opts.lrv, opts.klrv);
  out.weight = core::spd_inverse(out.sigma);
  const GaussNewtonResult second = gauss_newton(fn, out.theta_step1, out.weight, opts.gn);
  out.theta = second.theta;
  out.objective = second.objective;
  out.j_statistic = n * second.objective;
  return out;
}

Vector smoothed_check_gradient(const VectorCRef& y, const MatrixCRef& x, double tau, double h,
                               const VectorCRef& theta) {
  const Vector r = y - x * theta;
  Vector level(r.size());
  for (Index i = 0; i < r.size(); ++i) level(i) = moments::smooth_step(r(i) / h) + tau - 1.0;
  return -(x.transpose() * level) / static_cast<double>(y.size());
}

namespace {

double smoothed_check_loss(const VectorCRef& y, const MatrixCRef& x, double tau, double h, const VectorCRef& theta) {
  const Vector r = y - x * theta;
  double total = 0.0;
  for (Index i = 0; i < r.size(); ++i) total += (tau - 1.0) * r(i) + h * moments::smooth_step_integral(r(i) / h);
  return total / static_cast<double>(y.size());
}

Matrix smoothed_check_hessian(const VectorCRef& y, const MatrixCRef& x, double h, const VectorCRef& theta) {
  const Vector r = y - x * theta;
  Vector wgt(r.size());
  for (Index i = 0; i < r.size(); ++i) wgt(i) = moments::smooth_step_derivative(r(i) / h) / h;
  return x.transpose() * (x.array().colwise() * wgt.array()).matrix() / static_cast<double>(y.size());
}

// Damped Newton on the convex smoothed loss at a fixed bandwidth. Returns
// the final gradient norm.
double newton_stage(const VectorCRef& y, const MatrixCRef& x, double tau, double h, Vector& theta, double tol,
                    int max_iters) {
  Vector grad = smoothed_check_gradient(y, x, tau, h, theta);
  double loss = smoothed_check_loss(y, x, tau, h, theta);
  for (int it = 0; it < max_iters && grad.norm() >= tol; ++it) {
    Matrix hess = smoothed_check_hessian(y, x, h, theta);
    Eigen::LDLT<Matrix> ldlt(hess);
    double ridge = 1e-12 * (1.0 + hess.trace());
    while (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
      hess.diagonal().array() += ridge;
      ridge *= 10.0;
      ldlt.compute(hess);
      if (ridge > 1e6) break;
    }
    const Vector dir = -ldlt.solve(grad);
    bool moved = false;
    double t = 1.0;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const Vector cand = theta + t * dir;
      const double loss_c = smoothed_check_loss(y, x, tau, h, cand);
      const Vector grad_c = smoothed_check_gradient(y, x, tau, h, cand);
      // Near the optimum the loss change drowns in rounding; a smaller
      // gradient is then the better acceptance signal.
      if (loss_c < loss || (loss_c <= loss + 1e-15 * (1.0 + std::abs(loss)) && grad_c.norm() < grad.norm())) {
        theta = cand;
        loss = loss_c;
        grad = grad_c;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return grad.norm();
}

}  // namespace

Vector initial_quantile_fit(const VectorCRef& y, const MatrixCRef& x, double tau, double tol) {
  const Index n = y.size(), p = x.cols();
  if (x.rows() != n) throw DimensionError("initial_quantile_fit: row counts differ");
  if (n < 5 * p) throw DomainError("initial_quantile_fit: need at least 5p observations");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("initial_quantile_fit: tau must lie in (0,1)");

  Vector theta = solve_full_rank(x.transpose() * x, x.transpose() * y, "initial_quantile_fit");
  const double h_target = moments::SmoothedQuantileMoment::bandwidth(p, static_cast<std::size_t>(n));
  const Vector resid = y - x * theta;
  const double spread = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  double h = std::max(h_target, 2.0 * spread);
  for (;;) {
    const bool last = h <= h_target;
    const double gnorm = newton_stage(y, x, tau, h, theta, last ? tol : 1e-6, 200);
    if (last) {
      if (!(gnorm < tol)) throw NoConvergence("initial_quantile_fit: gradient norm " + std::to_string(gnorm));
      return theta;
    }
    h = std::max(h_target, 0.5 * h);
  }
}

}  // namespace ogmm::offline
