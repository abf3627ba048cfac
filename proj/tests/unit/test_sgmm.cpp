#include "ogmm/errors.hpp"
#include "ogmm/moments/linear.hpp"
#include "ogmm/sgmm/sgmm.hpp"
#include "test_models.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ogmm;
using core::Batch;
using testing_support::Gen;
using testing_support::rel_diff;

TEST_CASE("Sherman-Morrison weighting equals the direct inverse second moment") {
  Gen gen(71);
  moments::IvMoment model(1, 3);
  const Matrix d0 = testing_support::linear_iv_rows(gen, 100, 1, 3, Vector::Ones(1));
  const Matrix stream = testing_support::linear_iv_rows(gen, 300, 1, 3, Vector::Ones(1));
  sgmm::SgmmConfig cfg;
  cfg.eta0 = 0.0;  // the iterate stays put, so all moments share one theta
  sgmm::Sgmm s(model, Batch(d0), Vector::Ones(1), cfg);
  s.push(Batch(stream));
  Matrix all(400, 5);
  all << d0, stream;
  const Matrix rows = model.moment_rows(Vector::Ones(1), Batch(all));
  const Matrix second = rows.transpose() * rows / 400.0;
  CHECK(rel_diff(s.w_second_moment(), second.inverse()) < 1e-9);
  CHECK(s.k() == 300);
}

TEST_CASE("learning rate is the inverse kappa-quantile of scaled step norms") {
  Gen gen(72);
  moments::IvMoment model(2, 3);
  const Matrix d0 = testing_support::linear_iv_rows(gen, 51, 2, 3, Vector::Ones(2));
  const Vector theta0 = Vector::Ones(2);
  const auto bm = model.evaluate(theta0, Batch(d0), false);
  const Matrix v = bm.grad_sum / 51.0, w = Matrix::Identity(3, 3);
  const Matrix map = (v.transpose() * v).inverse() * v.transpose();
  std::vector<double> norms;
  for (Index i = 0; i < 51; ++i) {
    const Matrix m = map * model.gradient(theta0, d0.row(i).transpose(), 0.0);
    Eigen::JacobiSVD<Matrix> svd(m);
    norms.push_back(svd.singularValues()(0) / 2.0);
  }
  std::sort(norms.begin(), norms.end());
  CHECK(sgmm::select_learning_rate(model, Batch(d0), theta0, v, w, 0.5) == doctest::Approx(1.0 / norms[25]));
  CHECK(sgmm::select_learning_rate(model, Batch(d0), theta0, v, w, 0.0) == doctest::Approx(1.0 / norms[0]));
}

TEST_CASE("SGMM converges on a linear IV stream and averaging helps") {
  Gen gen(73);
  const Vector theta = (Vector(2) << 1.0, -0.5).finished();
  moments::IvMoment model(2, 4);
  const Matrix d0 = testing_support::linear_iv_rows(gen, 500, 2, 4, theta);
  sgmm::Sgmm s(model, Batch(d0), offline::tsls(Batch(d0), 2, 4));
  for (int b = 0; b < 20; ++b) s.push(Batch(testing_support::linear_iv_rows(gen, 1000, 2, 4, theta)));
  CHECK((s.theta_bar() - theta).norm() < 0.05);
  const auto [lo, hi] = s.marginal_interval(0, 0.01);
  CHECK(lo < hi);
  CHECK(hi - lo < 0.2);
  const auto r = s.overident();
  CHECK(r.df == 2);
  CHECK(r.statistic >= 0.0);
}

TEST_CASE("SGMM with kernel LRV weighting") {
  Gen gen(74);
  moments::IvMoment model(1, 2);
  const Matrix d0 = testing_support::linear_iv_rows(gen, 200, 1, 2, Vector::Ones(1));
  sgmm::SgmmConfig cfg;
  cfg.use_klrv = true;
  sgmm::Sgmm s(model, Batch(d0), Vector::Ones(1), cfg);
  s.push(Batch(testing_support::linear_iv_rows(gen, 2000, 1, 2, Vector::Ones(1))));
  s.refresh_weighting();
  CHECK(rel_diff(s.w_check() * s.sigma(), Matrix::Identity(2, 2)) < 1e-8);
  CHECK(std::abs(s.theta_bar()(0) - 1.0) < 0.1);
}

TEST_CASE("SGMM errors") {
  Gen gen(75);
  moments::IvMoment model(1, 2);
  const Matrix d0 = testing_support::linear_iv_rows(gen, 20, 1, 2, Vector::Ones(1));
  sgmm::SgmmConfig bad;
  bad.a = 1.5;
  CHECK_THROWS_AS(sgmm::Sgmm(model, Batch(d0), Vector::Ones(1), bad), DomainError);
  CHECK_THROWS_AS(sgmm::Sgmm(model, Batch(d0), Vector::Ones(2)), DimensionError);
  sgmm::Sgmm s(model, Batch(d0), Vector::Ones(1));
  CHECK_THROWS_AS(s.overident(), Underflow);
  Matrix zero = d0;
  zero.col(2).setZero();
  zero.col(3).setZero();
  CHECK_THROWS(sgmm::Sgmm(model, Batch(zero), Vector::Ones(1)));
}
