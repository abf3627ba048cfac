#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace ogmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Read-only views used on the hot paths so callers can pass blocks without copies.
using VectorCRef = Eigen::Ref<const Vector>;
using MatrixCRef = Eigen::Ref<const Matrix>;

}  // namespace ogmm
