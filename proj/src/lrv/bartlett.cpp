#include "ogmm/lrv/bartlett.hpp"

#include "ogmm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ogmm::lrv {

namespace {

Matrix demeaned(const MatrixCRef& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return x.rowwise() - mean;
}

void check_input(const MatrixCRef& x) {
  if (x.rows() < 3) throw DomainError("bartlett_offline: need at least 3 rows");
  if (x.cols() < 1) throw DimensionError("bartlett_offline: no columns");
  bool identical = true;
  for (Index i = 1; i < x.rows() && identical; ++i) identical = (x.row(i).array() == x.row(0).array()).all();
  if (identical) throw DegenerateSeries("bartlett_offline: all rows identical");
}

}  // namespace

double andrews_ar1_bandwidth(const MatrixCRef& x) {
  check_input(x);
  const Matrix e = demeaned(x);
  const Index n = e.rows();
  double num = 0.0, den = 0.0;
  for (Index c = 0; c < e.cols(); ++c) {
    const auto col = e.col(c);
    const double sxx = col.head(n - 1).squaredNorm();
    if (sxx <= 0.0) continue;
    const double rho = std::clamp(col.head(n - 1).dot(col.tail(n - 1)) / sxx, -0.97, 0.97);
    const Vector resid = col.tail(n - 1) - rho * col.head(n - 1);
    const double s2 = resid.squaredNorm() / static_cast<double>(n - 1);
    const double s4 = s2 * s2;
    num += 4.0 * rho * rho * s4 / (std::pow(1.0 - rho, 6) * std::pow(1.0 + rho, 2));
    den += s4 / std::pow(1.0 - rho, 4);
  }
  if (den <= 0.0) return 0.0;
  const double alpha = num / den;
  return std::max(0.0, 1.1447 * std::cbrt(alpha * static_cast<double>(n)));
}

Matrix bartlett_offline(const MatrixCRef& x, const BartlettConfig& cfg) {
  check_input(x);
  const double bw = cfg.bandwidth ? *cfg.bandwidth : andrews_ar1_bandwidth(x);
  if (!(bw >= 0.0)) throw DomainError("bartlett_offline: bandwidth must be non-negative");
  const Matrix e = demeaned(x);
  const Index n = e.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix out = inv_n * (e.transpose() * e);
  const Index max_lag = std::min<Index>(static_cast<Index>(std::floor(bw)), n - 1);
  for (Index h = 1; h <= max_lag; ++h) {
    const Matrix gamma = inv_n * (e.bottomRows(n - h).transpose() * e.topRows(n - h));
    const double w = 1.0 - static_cast<double>(h) / (bw + 1.0);
    out += w * (gamma + gamma.transpose());
  }
  return 0.5 * (out + out.transpose());
}

Matrix sample_covariance(const MatrixCRef& x) {
  if (x.rows() < 1) throw DomainError("sample_covariance: empty input");
  const Matrix e = demeaned(x);
  return (e.transpose() * e) / static_cast<double>(x.rows());
}

}  // namespace ogmm::lrv
