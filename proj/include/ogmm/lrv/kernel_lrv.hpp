#pragma once

#include "ogmm/types.hpp"

#include <cstddef>

namespace ogmm::lrv {

/// Tuning of the recursive kernel estimator.
///
/// The kernel is K_n(i,j) = (1 - |i-j|^lambda / t_n^lambda) * 1{|i-j| <= s'_{max(i,j)}}
/// with s_n = min(floor(Psi n^psi), n-1) and t_n = min(ceil(Xi n^xi), n).
/// A non-positive psi or xi means "use 1/(1+2*lambda)".
struct KernelLrvConfig {
  int lambda = 1;
  double phi = 1.0;
  double Psi = 1.0;
  double Xi = 1.0;
  double psi = 0.0;
  double xi = 0.0;
  /// Queries report not-ready until this many observations were pushed.
  std::size_t pilot = 0;

  double psi_value() const { return psi > 0.0 ? psi : 1.0 / (1.0 + 2.0 * lambda); }
  double xi_value() const { return xi > 0.0 ? xi : 1.0 / (1.0 + 2.0 * lambda); }
  void validate() const;
};

/// Streaming long-run variance estimator with O(s'_n q + q^2) work per
/// observation and memory proportional to the current window s'_n.
///
/// Pair contributions are final once the later index arrives (the
/// indicator binds at max(i,j)), so the estimator keeps running sums of
/// X_i X_j^T, X_i and pair counts for the weights |i-j|^0 and |i-j|^lambda,
/// and assembles the mean-corrected matrix at query time.
class KernelLrv {
 public:
  /// Complete serializable state.
  struct State {
    KernelLrvConfig config;
    Index dim = 0;
    std::size_t n = 0;
    std::size_t s_prime = 0;
    Vector shift;       // first observation; all sums use X_k - shift
    Vector sum;         // sum of shifted observations
    Matrix a0, a_lambda;  // lower triangles are authoritative
    Vector b0, b_lambda;
    double c0 = 0.0, c_lambda = 0.0;
    Matrix window;      // q x len, oldest first
  };

  KernelLrv() = default;
  KernelLrv(Index dim, KernelLrvConfig config);

  void push(const VectorCRef& x);
  void push_rows(const MatrixCRef& rows);

  /// Symmetrized estimate without positive-definiteness adjustment.
  Matrix query_raw() const;
  /// query_raw() followed by pd_adjust. Throws Underflow when n < 2.
  Matrix query() const;
  bool ready() const;

  std::size_t count() const { return n_; }
  Index dim() const { return dim_; }
  std::size_t s_prime() const { return s_prime_; }
  std::size_t buffer_length() const { return len_; }
  const KernelLrvConfig& config() const { return config_; }

  std::size_t s_at(std::size_t n) const;
  std::size_t t_at(std::size_t n) const;
  /// s'_{n+1} given s'_n (pure recursion step).
  std::size_t next_s_prime(std::size_t n, std::size_t s_prime_n) const;

  State state() const;
  static KernelLrv restore(const State& st);

 private:
  const double* lag(std::size_t d) const;  // X_{n+1-d} for d >= 1
  void append(const Vector& x);
  void trim();

  KernelLrvConfig config_{};
  Index dim_ = 0;
  std::size_t n_ = 0;
  std::size_t s_prime_ = 0;
  Vector shift_, sum_;
  Matrix a0_, a_lambda_;
  Vector b0_, b_lambda_;
  double c0_ = 0.0, c_lambda_ = 0.0;

  // ring buffer of shifted observations, one per column
  Matrix ring_;
  std::size_t head_ = 0;
  std::size_t len_ = 0;
};

}  // namespace ogmm::lrv
