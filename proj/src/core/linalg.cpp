#include "ogmm/core/linalg.hpp"

#include "ogmm/errors.hpp"

#include <cmath>

namespace ogmm::core {

namespace {

constexpr double kMinRcond = 1e-14;

bool usable(const Eigen::LLT<Matrix>& llt) {
  return llt.info() == Eigen::Success && llt.rcond() > kMinRcond;
}

Eigen::LLT<Matrix> factor_or_throw(const MatrixCRef& s, const char* what) {
  if (s.rows() != s.cols()) throw DimensionError(std::string(what) + ": matrix must be square");
  Eigen::LLT<Matrix> llt(s);
  if (!usable(llt)) throw SingularSystem(std::string(what) + ": matrix is not positive definite");
  return llt;
}

}  // namespace

Vector gmm_step(const MatrixCRef& v, const MatrixCRef& w, const VectorCRef& u, double& decrement) {
  if (v.rows() != w.rows() || w.rows() != w.cols() || u.size() != v.rows())
    throw DimensionError("gmm_step: inconsistent shapes");
  const Matrix wv = w * v;
  Matrix a = v.transpose() * wv;
  a = 0.5 * (a + a.transpose());
  const Vector rhs = wv.transpose() * u;

  Eigen::LLT<Matrix> llt(a);
  if (!usable(llt)) {
    // A ridge can only rescue a system with some curvature left.
    if (!(a.diagonal().maxCoeff() > 0.0)) throw SingularSystem("V^T W V is zero or not finite");
    const double p = static_cast<double>(a.rows());
    const double ridge = 1e-10 * (1.0 + std::abs(a.trace()) / p);
    a.diagonal().array() += ridge;
    llt.compute(a);
    if (!usable(llt)) throw SingularSystem("V^T W V is singular after ridge regularization");
  }
  Vector step = llt.solve(rhs);
  if (!step.allFinite()) throw NonFiniteUpdate("GMM step is not finite");
  decrement = rhs.dot(step);
  return step;
}

Vector gmm_step(const MatrixCRef& v, const MatrixCRef& w, const VectorCRef& u) {
  double ignored = 0.0;
  return gmm_step(v, w, u, ignored);
}

double inverse_quadratic(const MatrixCRef& s, const VectorCRef& x) {
  const auto llt = factor_or_throw(s, "inverse_quadratic");
  if (x.size() != s.rows()) throw DimensionError("inverse_quadratic: dimension mismatch");
  const Vector half = llt.matrixL().solve(x);
  return half.squaredNorm();
}

Matrix spd_solve(const MatrixCRef& s, const MatrixCRef& b) {
  const auto llt = factor_or_throw(s, "spd_solve");
  if (b.rows() != s.rows()) throw DimensionError("spd_solve: dimension mismatch");
  return llt.solve(b);
}

Matrix spd_inverse(const MatrixCRef& s) {
  Matrix inv = spd_solve(s, Matrix::Identity(s.rows(), s.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace ogmm::core
