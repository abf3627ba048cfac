#pragma once

#include "ogmm/core/batch.hpp"
#include "ogmm/simgen/rng.hpp"
#include "ogmm/types.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ogmm::simgen {

/// Simulation designs:
///  1 heteroskedastic IV, p = 5, q = 20            layout [y, x1..x5, z1..z20]
///  2 ARMA(2,2) with lagged-y instruments          layout [y, x1, x2, z1..z4]
///  3/4 over-identification design, iid / VAR(1)   layout [y, x, z1, z2]
///  5/6 quantile regression, iid / VAR(1), p = 10  layout [y, x1..x10], x1 = 1
///  7/8 design 3/4 with parameter-change and misspecification windows
struct SimSpec {
  int model = 1;
  /// Coefficient on z1 (models 3, 4) or the anomaly magnitude (7, 8).
  double theta2 = 0.0;
  /// Quantile level defining the target parameter of models 5, 6.
  double tau = 0.1;
};

class Generator {
 public:
  virtual ~Generator() = default;

  /// Next n observations of the stream.
  virtual Matrix next(Index n) = 0;
  core::Batch next_batch(Index n) { return core::Batch(next(n)); }

  virtual Index obs_dim() const = 0;
  /// Parameter the moment model should recover.
  virtual Vector theta_star() const = 0;
  /// Column names of the observation layout.
  virtual std::vector<std::string> columns() const = 0;
  /// Number of regressors p and instruments q in the layout (q = 0 for
  /// designs without instruments).
  virtual Index num_regressors() const = 0;
  virtual Index num_instruments() const = 0;
  /// Observations produced so far.
  std::size_t produced() const { return produced_; }

 protected:
  std::size_t produced_ = 0;
};

/// Throws DomainError for unknown models or out-of-range parameters.
std::unique_ptr<Generator> make_generator(const SimSpec& spec, std::uint64_t seed);

/// True if the 1-based observation index falls in a parameter-change window
/// (models 7, 8).
bool in_change_window(std::size_t k);
/// True if the 1-based observation index falls in a misspecification window.
bool in_misspec_window(std::size_t k);

/// Sum of k latent AR(1) processes plus white noise; theta follows the
/// wavelet-moment layout (rho_1, s2_1, ..., rho_k, s2_k, s2_wn). The AR
/// states start at zero and run 10 / (1 - max rho) burn-in steps.
Vector gmwm_signal(const VectorCRef& theta, Index n, std::uint64_t seed);

}  // namespace ogmm::simgen
