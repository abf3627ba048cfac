#pragma once

#include "ogmm/types.hpp"

#include <optional>

namespace ogmm::core {

/// A block of observations, one per row. `aux` carries a per-batch scalar
/// that some moment models need (the smoothing bandwidth of the quantile
/// moments); the estimator fills it from the model when it is unset.
struct Batch {
  Matrix obs;
  std::optional<double> aux;

  Batch() = default;
  explicit Batch(Matrix observations, std::optional<double> aux_value = std::nullopt)
      : obs(std::move(observations)), aux(aux_value) {}

  Index size() const { return obs.rows(); }
  Index width() const { return obs.cols(); }
  double aux_or_zero() const { return aux.value_or(0.0); }

  /// Throws DimensionError on a width mismatch or an empty batch and
  /// DomainError on non-finite entries.
  void validate(Index expected_width) const;
};

}  // namespace ogmm::core
