#include "ogmm/lrv/pd_adjust.hpp"

#include "ogmm/errors.hpp"

#include <algorithm>

namespace ogmm::lrv {

double pd_floor(const MatrixCRef& m) {
  const double q = static_cast<double>(m.rows());
  return 1e-8 * (1.0 + std::max(0.0, m.trace()) / q);
}

Matrix pd_adjust(const MatrixCRef& m) {
  if (m.rows() != m.cols()) throw DimensionError("pd_adjust: matrix must be square");
  if (m.size() == 0) return Matrix(m);
  const double floor = pd_floor(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success) throw NumericError("pd_adjust: eigendecomposition failed");
  Vector values = eig.eigenvalues();
  if (values.minCoeff() >= floor) return Matrix(m);
  values = values.cwiseMax(floor);
  Matrix out = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace ogmm::lrv
