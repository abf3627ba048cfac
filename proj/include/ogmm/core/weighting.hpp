#pragma once

#include "ogmm/lrv/kernel_lrv.hpp"
#include "ogmm/lrv/welford.hpp"
#include "ogmm/types.hpp"

#include <optional>

namespace ogmm::core {

enum class WeightingMode { Fixed, Welford, KernelLrv };

const char* to_string(WeightingMode mode);
WeightingMode weighting_mode_from_string(const std::string& name);

/// The weighting matrix used by the OGMM step. Fixed mode holds a constant
/// matrix; the inverse modes feed moment vectors into a variance estimator
/// and keep W = pd_adjust(Sigma)^{-1}. Before the estimator is ready (fewer
/// than two observations, or fewer than the configured pilot size) W stays
/// at its initial value, the identity unless given.
class Weighting {
 public:
  Weighting() = default;

  static Weighting fixed(Matrix w);
  static Weighting identity(Index q) { return fixed(Matrix::Identity(q, q)); }
  /// pilot: minimum observation count before the first inversion.
  static Weighting welford(Index q, std::size_t pilot = 0);
  static Weighting kernel(Index q, lrv::KernelLrvConfig cfg);

  WeightingMode mode() const { return mode_; }
  Index dim() const { return w_.rows(); }
  const Matrix& weight() const { return w_; }

  /// Feeds moment vectors (rows) and refreshes W if the estimator is ready.
  void absorb(const MatrixCRef& moment_rows);
  bool ready() const;
  std::size_t count() const;

  /// pd-adjusted variance estimate. Throws std::logic_error in Fixed mode
  /// and Underflow before two observations.
  Matrix variance() const;

  const lrv::Welford* welford_state() const { return welford_ ? &*welford_ : nullptr; }
  const lrv::KernelLrv* kernel_state() const { return kernel_ ? &*kernel_ : nullptr; }
  std::size_t pilot() const { return pilot_; }

  /// Rebuilds a weighting handle from serialized parts.
  static Weighting restore(WeightingMode mode, Matrix w, std::size_t pilot, std::optional<lrv::Welford> welford,
                           std::optional<lrv::KernelLrv> kernel);

 private:
  void refresh();

  WeightingMode mode_ = WeightingMode::Fixed;
  Matrix w_;
  std::size_t pilot_ = 0;
  std::optional<lrv::Welford> welford_;
  std::optional<lrv::KernelLrv> kernel_;
};

}  // namespace ogmm::core
