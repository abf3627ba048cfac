#include "ogmm/core/batch.hpp"

#include "ogmm/errors.hpp"

#include <cmath>
#include <string>

namespace ogmm::core {

void Batch::validate(Index expected_width) const {
  if (obs.rows() < 1) throw DimensionError("batch is empty");
  if (obs.cols() != expected_width)
    throw DimensionError("batch width " + std::to_string(obs.cols()) + ", expected " +
                         std::to_string(expected_width));
  if (!obs.allFinite()) throw DomainError("batch contains non-finite entries");
  if (aux && !std::isfinite(*aux)) throw DomainError("batch aux value is not finite");
}

}  // namespace ogmm::core
