#pragma once

#include "ogmm/core/batch.hpp"
#include "ogmm/types.hpp"

#include <cstddef>
#include <optional>
#include <string>

namespace ogmm::core {

/// Sums of the moment function and its Jacobian over one batch, plus the
/// per-row moments when they were requested.
struct BatchMoments {
  Vector g_sum;     // G(theta; D) = sum_i g(theta, x_i)
  Matrix grad_sum;  // sum_i grad g(theta, x_i), q x p
  Matrix rows;      // n x q, empty unless requested
};

/// A moment condition E g(theta*, x) = 0 with p parameters, q >= p moments
/// and observations of width d.
class MomentModel {
 public:
  virtual ~MomentModel() = default;

  virtual Index num_params() const = 0;
  virtual Index num_moments() const = 0;
  virtual Index obs_dim() const = 0;
  virtual std::string name() const = 0;

  virtual Vector moment(const VectorCRef& theta, const VectorCRef& obs, double aux) const = 0;
  virtual Matrix gradient(const VectorCRef& theta, const VectorCRef& obs, double aux) const = 0;

  /// Batch evaluation. The default loops over rows; models with a cheap
  /// vectorized form override it.
  virtual BatchMoments evaluate(const VectorCRef& theta, const Batch& batch, bool want_rows) const;

  /// n x q matrix of per-row moments.
  Matrix moment_rows(const VectorCRef& theta, const Batch& batch) const;

  /// Auxiliary value for a batch of n_batch rows arriving after n_before
  /// observations. Models without auxiliary data return nullopt.
  virtual std::optional<double> batch_aux(std::size_t n_before, std::size_t n_batch) const {
    return std::nullopt;
  }

  /// Returns a copy of the batch with aux filled in if the model needs it
  /// and the caller left it unset.
  Batch prepare(const Batch& batch, std::size_t n_before) const;
};

}  // namespace ogmm::core
