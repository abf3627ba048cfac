#include "ogmm/core/estimator.hpp"

#include "ogmm/core/linalg.hpp"
#include "ogmm/errors.hpp"

#include <algorithm>

namespace ogmm::core {

namespace {

void check_state(const OgmmState& s, const MomentModel& model) {
  if (s.N == 0) throw std::logic_error("OGMM state is not initialized");
  if (s.theta.size() != model.num_params() || s.Uprime.size() != model.num_moments())
    throw DimensionError("OGMM state does not match the moment model");
}

// Absorbs the new batch at theta_new: weighting first, then the refresh of
// Uprime/Vprime, which are still linearized at theta_prev on entry.
void finish_update(OgmmState& s, const MomentModel& model, const Batch& db, const Vector& theta_prev,
                   const Vector& theta_new, const UpdateOptions& opts) {
  const bool weigh = opts.update_weighting && s.weighting.mode() != WeightingMode::Fixed;
  const BatchMoments at_new = model.evaluate(theta_new, db, weigh);
  if (weigh) s.weighting.absorb(at_new.rows);

  const double n_prev = static_cast<double>(s.N);
  const double n_new = n_prev + static_cast<double>(db.size());
  s.Uprime = (n_prev * s.Uprime + n_prev * (s.Vprime * (theta_new - theta_prev)) + at_new.g_sum) / n_new;
  s.Vprime = (n_prev * s.Vprime + at_new.grad_sum) / n_new;
  s.theta = theta_new;
  s.N += static_cast<std::size_t>(db.size());
  s.b += 1;
}

}  // namespace

void ImplicitConfig::validate() const {
  if (max_iters < 1) throw DomainError("ImplicitConfig: max_iters must be >= 1");
  if (!(tol > 0.0)) throw DomainError("ImplicitConfig: tol must be positive");
}

OgmmState init_state(const MomentModel& model, const Batch& d1_in, const VectorCRef& theta1, Weighting weighting) {
  const Index p = model.num_params(), q = model.num_moments();
  if (q < p) throw DimensionError("moment model has fewer moments than parameters");
  if (theta1.size() != p) throw DimensionError("initial estimate has the wrong dimension");
  if (weighting.dim() != q) throw DimensionError("weighting dimension does not match the moment count");
  d1_in.validate(model.obs_dim());
  if (d1_in.size() < p) throw InitializationError("first batch is smaller than the parameter dimension");
  if (!theta1.allFinite()) throw InitializationError("initial estimate is not finite");

  const Batch d1 = model.prepare(d1_in, 0);
  const bool weigh = weighting.mode() != WeightingMode::Fixed;
  const BatchMoments m = model.evaluate(theta1, d1, weigh);
  if (weigh) weighting.absorb(m.rows);

  OgmmState s;
  s.b = 1;
  s.N = static_cast<std::size_t>(d1.size());
  s.theta = theta1;
  s.Uprime = m.g_sum / static_cast<double>(s.N);
  s.Vprime = m.grad_sum / static_cast<double>(s.N);
  s.weighting = std::move(weighting);

  const Matrix vw = s.Vprime.transpose() * s.weighting.weight() * s.Vprime;
  Eigen::LLT<Matrix> llt(0.5 * (vw + vw.transpose()));
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw InitializationError("V'^T W V' is singular at the initial estimate");
  return s;
}

OgmmState update_batch(OgmmState s, const MomentModel& model, const Batch& db_in, const UpdateOptions& opts) {
  check_state(s, model);
  db_in.validate(model.obs_dim());
  const Batch db = model.prepare(db_in, s.N);

  const double n_prev = static_cast<double>(s.N);
  const double n_new = n_prev + static_cast<double>(db.size());
  const BatchMoments at_prev = model.evaluate(s.theta, db, false);
  const Matrix v_hat = (n_prev * s.Vprime + at_prev.grad_sum) / n_new;
  const Vector u_hat = (n_prev * s.Uprime + at_prev.g_sum) / n_new;

  const Vector theta_prev = s.theta;
  const Vector theta_new = theta_prev - gmm_step(v_hat, s.weighting.weight(), u_hat);
  if (!theta_new.allFinite()) throw NonFiniteUpdate("OGMM update produced a non-finite estimate");

  finish_update(s, model, db, theta_prev, theta_new, opts);
  s.no_convergence = false;
  s.inner_iterations = 1;
  return s;
}

OgmmState update_batch_implicit(OgmmState s, const MomentModel& model, const Batch& db_in, const ImplicitConfig& cfg,
                                const UpdateOptions& opts) {
  cfg.validate();
  check_state(s, model);
  db_in.validate(model.obs_dim());
  const Batch db = model.prepare(db_in, s.N);

  const double n_prev = static_cast<double>(s.N);
  const double n_new = n_prev + static_cast<double>(db.size());
  const Vector theta_prev = s.theta;
  const Matrix& w = s.weighting.weight();

  Vector theta = theta_prev;
  bool converged = false;
  int steps = 0;
  for (int r = 1; r <= cfg.max_iters + 1; ++r) {
    const BatchMoments m = model.evaluate(theta, db, false);
    const Matrix v_hat = (n_prev * s.Vprime + m.grad_sum) / n_new;
    const Vector u_hat = (n_prev * s.Uprime + n_prev * (s.Vprime * (theta - theta_prev)) + m.g_sum) / n_new;
    double decrement = 0.0;
    const Vector step = gmm_step(v_hat, w, u_hat, decrement);
    // The first step is the explicit update; later ones only run while the
    // remaining decrement is above tolerance.
    if (r > 1 && decrement < cfg.tol) {
      converged = true;
      break;
    }
    if (steps == cfg.max_iters) break;
    theta -= step;
    ++steps;
    if (!theta.allFinite()) throw NonFiniteUpdate("implicit OGMM iteration produced a non-finite estimate");
  }

  finish_update(s, model, db, theta_prev, theta, opts);
  s.no_convergence = !converged;
  s.inner_iterations = steps;
  return s;
}

std::pair<Vector, Matrix> direct_form_state(const OgmmState& s) {
  return {s.Uprime - s.Vprime * s.theta, s.Vprime};
}

std::vector<Batch> split_batch(const Batch& batch, std::size_t n_before) {
  std::vector<Batch> out;
  const Index n = batch.size();
  if (n_before == 0) {
    out.push_back(batch);
    return out;
  }
  std::size_t seen = n_before;
  Index start = 0;
  while (start < n) {
    const Index len = std::min<Index>(n - start, static_cast<Index>(seen));
    out.emplace_back(batch.obs.middleRows(start, len), batch.aux);
    start += len;
    seen += static_cast<std::size_t>(len);
  }
  return out;
}

void OgmmEstimator::init(const Batch& d1, const VectorCRef& theta1, Weighting weighting) {
  state_ = init_state(*model_, d1, theta1, std::move(weighting));
}

void OgmmEstimator::update(const Batch& db, const UpdateOptions& upd) {
  std::vector<Batch> pieces;
  if (opts_.split_large_batches)
    pieces = split_batch(db, state_.N);
  else
    pieces.push_back(db);
  for (const Batch& piece : pieces) {
    if (opts_.implicit)
      state_ = update_batch_implicit(std::move(state_), *model_, piece, opts_.implicit_cfg, upd);
    else
      state_ = update_batch(std::move(state_), *model_, piece, upd);
  }
}

}  // namespace ogmm::core
