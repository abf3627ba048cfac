#include "ogmm/core/estimator.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/inference/distributions.hpp"
#include "ogmm/inference/inference.hpp"
#include "ogmm/lrv/bartlett.hpp"
#include "ogmm/moments/linear.hpp"
#include "test_models.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ogmm;
using core::Batch;
using testing_support::Gen;
using testing_support::rel_diff;

namespace {

// Regularized lower incomplete gamma by its power series.
double chisq_cdf_series(double x, double df) {
  const double a = df / 2.0, z = x / 2.0;
  double term = 1.0 / a, sum = term;
  for (int k = 1; k < 1000; ++k) {
    term *= z / (a + k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return std::exp(a * std::log(z) - z - std::lgamma(a)) * sum;
}

}  // namespace

TEST_CASE("chi-square and normal distribution functions") {
  for (double df : {1.0, 2.0, 3.0, 7.0, 20.0})
    for (double x : {0.1, 0.5, 1.0, 3.0, 10.0, 25.0}) {
      CHECK(inference::chisq_cdf(x, df) == doctest::Approx(chisq_cdf_series(x, df)).epsilon(1e-10));
      CHECK(inference::chisq_sf(x, df) + inference::chisq_cdf(x, df) == doctest::Approx(1.0));
    }
  CHECK(inference::chisq_quantile(0.95, 1) == doctest::Approx(3.841458820694124));
  CHECK(inference::chisq_quantile(0.95, 2) == doctest::Approx(-2.0 * std::log(0.05)));
  CHECK(inference::normal_quantile(0.975) == doctest::Approx(1.959963984540054));
  CHECK(inference::normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(inference::chisq_cdf(-1.0, 2.0), DomainError);
  CHECK_THROWS_AS(inference::chisq_quantile(1.5, 2.0), DomainError);
}

TEST_CASE("test reports") {
  const auto r = inference::make_report(3.0, 1, {0.05, 0.1});
  CHECK(r.p_value == doctest::Approx(inference::chisq_sf(3.0, 1)));
  CHECK_FALSE(r.rejects(0.05));
  CHECK(r.rejects(0.1));
  CHECK(r.rejects(0.2));
  CHECK(r.to_json()["df"] == 1);
  CHECK_THROWS_AS(inference::make_report(1.0, 0), DomainError);
}

TEST_CASE("Sargan-Hansen statistic is N U'^T Sigma^{-1} U'") {
  Gen gen(61);
  moments::IvMoment model(1, 3);
  const Matrix d = testing_support::linear_iv_rows(gen, 400, 1, 3, Vector::Ones(1));
  auto s = core::init_state(model, Batch(d), Vector::Ones(1), core::Weighting::welford(3));
  const Matrix sigma = s.weighting.variance();
  const auto r = inference::sargan_hansen(s, sigma);
  CHECK(r.df == 2);
  CHECK(r.statistic == doctest::Approx(400.0 * s.Uprime.dot(sigma.inverse() * s.Uprime)).epsilon(1e-10));
  moments::IvMoment exact(2, 2);
  const Matrix e = testing_support::linear_iv_rows(gen, 100, 2, 2, Vector::Ones(2));
  const auto se = core::init_state(exact, Batch(e), Vector::Ones(2), core::Weighting::welford(2));
  CHECK_THROWS_AS(inference::sargan_hansen(se, se.weighting.variance()), ExactIdentification);
}

TEST_CASE("covariances, regions and intervals") {
  Gen gen(62);
  const Matrix v = gen.matrix(4, 2), sigma = gen.spd(4);
  const Matrix eff = inference::efficient_covariance(v, sigma);
  CHECK(rel_diff(eff, (v.transpose() * sigma.inverse() * v).inverse()) < 1e-10);
  // The sandwich collapses to the efficient form at W = Sigma^{-1}.
  CHECK(rel_diff(inference::sandwich_covariance(v, sigma.inverse(), sigma), eff) < 1e-9);

  core::OgmmState s;
  s.N = 100;
  s.theta = (Vector(2) << 1.0, 2.0).finished();
  s.Vprime = v;
  s.Uprime = Vector::Zero(4);
  const auto region = inference::confidence_region(s, sigma, 0.05);
  CHECK(region.contains(s.theta));
  const auto [lo, hi] = inference::marginal_interval(s, sigma, 0, 0.05);
  const double half = 1.959963984540054 * std::sqrt(eff(0, 0) / 100.0);
  CHECK(lo == doctest::Approx(1.0 - half));
  CHECK(hi == doctest::Approx(1.0 + half));
  // The marginal interval endpoints lie inside the joint region's shadow.
  Vector edge = s.theta;
  edge(0) = hi;
  CHECK(region.statistic(edge) <= region.critical * (1 + 1e-12));
  const Vector j = (Vector(2) << 1.0, 1.0).finished();
  const auto [l2, h2] = inference::linear_interval(s, sigma, j, 0.1);
  CHECK((l2 + h2) / 2 == doctest::Approx(3.0));
  CHECK(h2 - l2 == doctest::Approx(2 * 1.6448536269514722 * std::sqrt(j.dot(eff * j) / 100.0)));
}

TEST_CASE("full-sample anomaly statistic") {
  Gen gen(63);
  const Index p = 1, q = 3;
  moments::IvMoment model(p, q);
  const Matrix d1 = testing_support::linear_iv_rows(gen, 500, p, q, Vector::Ones(1));
  const Matrix db = testing_support::linear_iv_rows(gen, 100, p, q, Vector::Ones(1));
  const auto ref = core::init_state(model, Batch(d1), offline::tsls(Batch(d1), p, q), core::Weighting::welford(q));
  const auto [report, updated] = inference::anomaly_tf_update(ref, model, Batch(db));
  CHECK(report.df == 2 * q - p);
  CHECK(updated.weighting.count() == ref.weighting.count());
  const Matrix s1 = ref.weighting.variance();
  const auto [u1, v1] = core::direct_form_state(ref);
  const Vector m1 = u1 + v1 * updated.theta;
  const Vector gb = model.evaluate(updated.theta, Batch(db), false).g_sum;
  const double expected = 500.0 * m1.dot(s1.inverse() * m1) + gb.dot(s1.inverse() * gb) / 100.0;
  CHECK(report.statistic == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("unrestricted anomaly statistic") {
  Gen gen(64);
  const Index p = 1, q = 3;
  moments::IvMoment model(p, q);
  const Matrix d1 = testing_support::linear_iv_rows(gen, 500, p, q, Vector::Ones(1));
  const Matrix db = testing_support::linear_iv_rows(gen, 200, p, q, Vector::Ones(1));
  const auto ref = core::init_state(model, Batch(d1), offline::tsls(Batch(d1), p, q), core::Weighting::welford(q));
  const auto snap = inference::AnomalySnapshot::from_state(ref);
  const auto report = inference::anomaly_tu(snap, model, Batch(db));
  CHECK(report.df == 2 * (q - p));
  const auto fit = offline::twostep_gmm(model, Batch(db));
  const Matrix rows = model.moment_rows(fit.theta, Batch(db));
  const Matrix su = lrv::sample_covariance(rows);
  const Vector g = rows.colwise().sum().transpose();
  const Vector m1 = snap.U1 + snap.V1 * snap.theta1;
  const double expected = 500.0 * m1.dot(snap.Sigma1.inverse() * m1) + g.dot(su.inverse() * g) / 200.0;
  CHECK(report.statistic == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("restricted anomaly statistic matches the two-step closed form for linear moments") {
  Gen gen(65);
  const Index p = 2, q = 3;
  moments::IvMoment model(p, q);
  const Matrix d1 = testing_support::linear_iv_rows(gen, 300, p, q, Vector::Ones(p));
  const Matrix db = testing_support::linear_iv_rows(gen, 150, p, q, Vector::Ones(p));
  const auto report = inference::anomaly_tr(Batch(d1), Batch(db), model);
  CHECK(report.df == 2 * q - p);

  // sum_b n_b^{-1} (Z_b^T (y_b - X_b t))^T W_b (Z_b^T (y_b - X_b t)) is quadratic in t.
  auto solve = [&](const Matrix& w1, const Matrix& wb) {
    Matrix a = Matrix::Zero(p, p);
    Vector c = Vector::Zero(p);
    for (int k = 0; k < 2; ++k) {
      const Matrix& d = k ? db : d1;
      const Matrix& w = k ? wb : w1;
      const double n = double(d.rows());
      const Matrix zx = d.rightCols(q).transpose() * d.middleCols(1, p);
      const Vector zy = d.rightCols(q).transpose() * d.col(0);
      a += zx.transpose() * w * zx / n;
      c += zx.transpose() * w * zy / n;
    }
    return Vector(a.ldlt().solve(c));
  };
  const Vector pooled = solve(Matrix::Identity(q, q), Matrix::Identity(q, q));
  const Matrix w1 = lrv::sample_covariance(model.moment_rows(pooled, Batch(d1))).inverse();
  const Matrix wb = lrv::sample_covariance(model.moment_rows(pooled, Batch(db))).inverse();
  const Vector t = solve(w1, wb);
  const Vector g1 = model.evaluate(t, Batch(d1), false).g_sum;
  const Vector gb = model.evaluate(t, Batch(db), false).g_sum;
  const double expected = g1.dot(w1 * g1) / 300.0 + gb.dot(wb * gb) / 150.0;
  CHECK(report.statistic == doctest::Approx(expected).epsilon(1e-7));
}
