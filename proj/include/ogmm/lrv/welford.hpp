#pragma once

#include "ogmm/types.hpp"

#include <cstddef>

namespace ogmm::lrv {

/// One-pass mean and covariance accumulator (Welford's recurrence, vector
/// form). Variance uses the population divisor n; a single observation
/// yields the zero matrix.
class Welford {
 public:
  Welford() = default;
  explicit Welford(Index dim) : mean_(Vector::Zero(dim)), m2_(Matrix::Zero(dim, dim)) {}

  void push(const VectorCRef& x);
  void push_rows(const MatrixCRef& rows);

  std::size_t count() const { return n_; }
  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& m2() const { return m2_; }
  Matrix variance() const;

  /// Rebuilds an accumulator from serialized fields.
  static Welford restore(std::size_t n, Vector mean, Matrix m2);

 private:
  std::size_t n_ = 0;
  Vector mean_;
  Matrix m2_;
};

}  // namespace ogmm::lrv
