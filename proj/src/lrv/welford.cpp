#include "ogmm/lrv/welford.hpp"

#include "ogmm/errors.hpp"

namespace ogmm::lrv {

void Welford::push(const VectorCRef& x) {
  if (x.size() != mean_.size()) throw DimensionError("Welford::push: dimension mismatch");
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  // (n-1)/n * delta delta^T keeps M2 exactly symmetric
  const double w = static_cast<double>(n_ - 1) / static_cast<double>(n_);
  const Matrix outer = delta * delta.transpose();
  m2_ += w * outer;
}

void Welford::push_rows(const MatrixCRef& rows) {
  for (Index i = 0; i < rows.rows(); ++i) push(rows.row(i).transpose());
}

Matrix Welford::variance() const {
  if (n_ == 0) return Matrix::Zero(dim(), dim());
  return m2_ / static_cast<double>(n_);
}

Welford Welford::restore(std::size_t n, Vector mean, Matrix m2) {
  if (m2.rows() != mean.size() || m2.cols() != mean.size())
    throw FormatError("Welford::restore: inconsistent shapes");
  Welford w;
  w.n_ = n;
  w.mean_ = std::move(mean);
  w.m2_ = std::move(m2);
  return w;
}

}  // namespace ogmm::lrv
