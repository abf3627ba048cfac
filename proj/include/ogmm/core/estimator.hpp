#pragma once

#include "ogmm/core/batch.hpp"
#include "ogmm/core/moment_model.hpp"
#include "ogmm/core/weighting.hpp"
#include "ogmm/types.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace ogmm::core {

/// Constant-size summary of everything seen so far. Uprime estimates
/// E g(theta*, x) and Vprime its Jacobian; both are kept linearized at the
/// current theta, so Uprime = U_b + V_b theta in the direct bookkeeping.
struct OgmmState {
  std::size_t b = 0;  // batches absorbed
  std::size_t N = 0;  // observations absorbed
  Vector theta;
  Vector Uprime;
  Matrix Vprime;
  Weighting weighting;

  // Diagnostics from the most recent implicit update.
  bool no_convergence = false;
  int inner_iterations = 0;
};

struct UpdateOptions {
  /// Whether this batch's moments feed the weighting estimator.
  bool update_weighting = true;
};

struct ImplicitConfig {
  int max_iters = 50;
  double tol = 1e-6;
  void validate() const;
};

/// Builds the state from the first batch and a caller-supplied estimate.
/// The weighting estimator absorbs g(theta1, x) for x in D1.
OgmmState init_state(const MomentModel& model, const Batch& d1, const VectorCRef& theta1, Weighting weighting);

/// One explicit OGMM update: Newton step from the previous estimate with the
/// Jacobian and moments of the new batch evaluated at that estimate, then
/// the weighting update and the refresh of Uprime/Vprime at the new theta.
OgmmState update_batch(OgmmState state, const MomentModel& model, const Batch& db, const UpdateOptions& opts = {});

/// Implicit variant: repeats the step, re-linearizing the new batch's
/// contribution at the latest iterate, until the Newton decrement drops
/// below cfg.tol or cfg.max_iters steps were taken.
OgmmState update_batch_implicit(OgmmState state, const MomentModel& model, const Batch& db, const ImplicitConfig& cfg,
                                const UpdateOptions& opts = {});

/// (U_b, V_b) of the direct bookkeeping: U_b = Uprime - Vprime theta.
std::pair<Vector, Matrix> direct_form_state(const OgmmState& state);

/// Splits a batch into consecutive pieces so that each piece is no larger
/// than the number of observations absorbed before it.
std::vector<Batch> split_batch(const Batch& batch, std::size_t n_before);

/// Convenience driver holding a model reference and options.
class OgmmEstimator {
 public:
  struct Options {
    bool implicit = false;
    ImplicitConfig implicit_cfg{};
    bool split_large_batches = false;
  };

  OgmmEstimator(const MomentModel& model, Options opts) : model_(&model), opts_(opts) {}

  void init(const Batch& d1, const VectorCRef& theta1, Weighting weighting);
  void update(const Batch& db, const UpdateOptions& upd = {});

  const OgmmState& state() const { return state_; }
  OgmmState& state() { return state_; }
  void set_state(OgmmState s) { state_ = std::move(s); }

 private:
  const MomentModel* model_;
  Options opts_;
  OgmmState state_;
};

}  // namespace ogmm::core
