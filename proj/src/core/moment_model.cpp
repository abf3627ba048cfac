#include "ogmm/core/moment_model.hpp"

namespace ogmm::core {

BatchMoments MomentModel::evaluate(const VectorCRef& theta, const Batch& batch, bool want_rows) const {
  const Index q = num_moments();
  BatchMoments out{Vector::Zero(q), Matrix::Zero(q, num_params()), Matrix()};
  if (want_rows) out.rows.resize(batch.size(), q);
  const double aux = batch.aux_or_zero();
  for (Index i = 0; i < batch.size(); ++i) {
    const Vector x = batch.obs.row(i).transpose();
    const Vector g = moment(theta, x, aux);
    out.g_sum += g;
    out.grad_sum += gradient(theta, x, aux);
    if (want_rows) out.rows.row(i) = g.transpose();
  }
  return out;
}

Matrix MomentModel::moment_rows(const VectorCRef& theta, const Batch& batch) const {
  return evaluate(theta, batch, true).rows;
}

Batch MomentModel::prepare(const Batch& batch, std::size_t n_before) const {
  Batch out = batch;
  if (!out.aux) out.aux = batch_aux(n_before, static_cast<std::size_t>(batch.size()));
  return out;
}

}  // namespace ogmm::core
