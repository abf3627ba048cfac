#pragma once

#include "ogmm/core/moment_model.hpp"

namespace ogmm::moments {

/// Least-squares moments g(theta, [y, x]) = x (y - x^T theta); q = p.
class OlsMoment final : public core::MomentModel {
 public:
  explicit OlsMoment(Index p);

  Index num_params() const override { return p_; }
  Index num_moments() const override { return p_; }
  Index obs_dim() const override { return p_ + 1; }
  std::string name() const override { return "ols"; }

  Vector moment(const VectorCRef& theta, const VectorCRef& obs, double aux) const override;
  Matrix gradient(const VectorCRef& theta, const VectorCRef& obs, double aux) const override;
  core::BatchMoments evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const override;

 private:
  Index p_;
};

/// Instrumental-variable moments g(theta, [y, x, z]) = z (y - x^T theta)
/// with p regressors and q >= p instruments.
class IvMoment final : public core::MomentModel {
 public:
  IvMoment(Index p, Index q);

  Index num_params() const override { return p_; }
  Index num_moments() const override { return q_; }
  Index obs_dim() const override { return 1 + p_ + q_; }
  std::string name() const override { return "iv"; }

  Vector moment(const VectorCRef& theta, const VectorCRef& obs, double aux) const override;
  Matrix gradient(const VectorCRef& theta, const VectorCRef& obs, double aux) const override;
  core::BatchMoments evaluate(const VectorCRef& theta, const core::Batch& batch, bool want_rows) const override;

 private:
  Index p_, q_;
};

}  // namespace ogmm::moments
