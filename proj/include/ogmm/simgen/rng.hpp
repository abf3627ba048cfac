#pragma once

#include <cstdint>
#include <random>

namespace ogmm::simgen {

/// Reproducible random source: std::mt19937_64 (whose output sequence is
/// fixed by the C++ standard) with uniforms built from the top 53 bits and
/// normals from the Box-Muller transform, so streams do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ogmm::simgen
