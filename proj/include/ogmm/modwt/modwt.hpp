#pragma once

#include "ogmm/types.hpp"

#include <cstddef>
#include <vector>

namespace ogmm::modwt {

/// Haar MODWT pyramid over a whole series. Column j (0-based level, lag
/// 2^j) holds w_{t,j} = (v_{t,j-1} - v_{t-2^j,j-1}) / 2 with v_{.,-1} = y.
/// Entries before t = 2^{j+1} (1-based) are undefined and set to NaN.
Matrix modwt_offline(const VectorCRef& y, int levels);

/// Streaming Haar MODWT. Level j keeps a FIFO of the last 2^j inputs it
/// received, so each push costs O(levels) and memory is O(2^levels).
class OnlineModwt {
 public:
  explicit OnlineModwt(int levels);

  /// Consumes one observation. Writes w_{n,j} into `w` (resized to the
  /// level count) and returns how many leading levels are defined; the
  /// rest are set to NaN.
  int push(double y, Vector& w);

  int levels() const { return levels_; }
  std::size_t count() const { return n_; }

 private:
  friend struct ModwtInit modwt_init(const VectorCRef& y, int levels);

  struct Fifo {
    std::vector<double> buf;
    std::size_t head = 0, size = 0;
  };

  int levels_;
  std::size_t n_ = 0;
  std::vector<Fifo> queues_;
};

struct ModwtInit {
  OnlineModwt state;
  Matrix coefficients;  // n x levels, NaN where undefined
};

/// Runs the offline pyramid on y and primes a streaming state so that
/// subsequent pushes continue the same transform. Requires n > 2^levels.
ModwtInit modwt_init(const VectorCRef& y, int levels);

/// Streaming transform that only reports time points where every level is
/// defined (t >= 2^levels), one row of q coefficients each. Row j-1 of the
/// output column order is the level with filter width 2^j, which is the
/// observation layout of the wavelet-variance moments.
class WaveletFeed {
 public:
  explicit WaveletFeed(int levels) : modwt_(levels) {}

  /// Pushes the series and returns the complete coefficient rows it produced.
  Matrix push(const VectorCRef& y);
  int levels() const { return modwt_.levels(); }
  std::size_t count() const { return modwt_.count(); }

 private:
  OnlineModwt modwt_;
};

}  // namespace ogmm::modwt
