#include "ogmm/moments/linear.hpp"

#include "ogmm/errors.hpp"

namespace ogmm::moments {

OlsMoment::OlsMoment(Index p) : p_(p) {
  if (p < 1) throw DimensionError("OlsMoment: p must be positive");
}

Vector OlsMoment::moment(const VectorCRef& theta, const VectorCRef& obs, double) const {
  const auto x = obs.tail(p_);
  return x * (obs(0) - x.dot(theta));
}

Matrix OlsMoment::gradient(const VectorCRef&, const VectorCRef& obs, double) const {
  const auto x = obs.tail(p_);
  return -(x * x.transpose());
}

core::BatchMoments OlsMoment::evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const {
  const auto y = batch.obs.col(0);
  const auto x = batch.obs.rightCols(p_);
  const Vector resid = y - x * theta;
  core::BatchMoments out;
  out.g_sum = x.transpose() * resid;
  out.grad_sum = -(x.transpose() * x);
  if (want_rows) out.rows = x.array().colwise() * resid.array();
  return out;
}

IvMoment::IvMoment(Index p, Index q) : p_(p), q_(q) {
  if (p < 1 || q < p) throw DimensionError("IvMoment: need 1 <= p <= q");
}

Vector IvMoment::moment(const VectorCRef& theta, const VectorCRef& obs, double) const {
  const double resid = obs(0) - obs.segment(1, p_).dot(theta);
  return obs.tail(q_) * resid;
}

Matrix IvMoment::gradient(const VectorCRef&, const VectorCRef& obs, double) const {
  return -(obs.tail(q_) * obs.segment(1, p_).transpose());
}

core::BatchMoments IvMoment::evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const {
  const auto y = batch.obs.col(0);
  const auto x = batch.obs.middleCols(1, p_);
  const auto z = batch.obs.rightCols(q_);
  const Vector resid = y - x * theta;
  core::BatchMoments out;
  out.g_sum = z.transpose() * resid;
  out.grad_sum = -(z.transpose() * x);
  if (want_rows) out.rows = z.array().colwise() * resid.array();
  return out;
}

}  // namespace ogmm::moments
