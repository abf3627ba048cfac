#include "ogmm/lrv/kernel_lrv.hpp"

#include "ogmm/errors.hpp"
#include "ogmm/lrv/pd_adjust.hpp"

#include <algorithm>
#include <cmath>

namespace ogmm::lrv {

namespace {

// Guards floor/ceil against pow() landing a hair below an exact integer
// (e.g. 8^(1/3) = 1.9999999999999996).
constexpr double kRoundingGuard = 1e-9;

double int_pow(double base, int exponent) {
  double out = 1.0;
  for (int i = 0; i < exponent; ++i) out *= base;
  return out;
}

}  // namespace

void KernelLrvConfig::validate() const {
  if (lambda < 1) throw DomainError("KernelLrvConfig: lambda must be a positive integer");
  if (!(phi >= 1.0)) throw DomainError("KernelLrvConfig: phi must be >= 1");
  if (!(Psi > 0.0) || !(Xi > 0.0)) throw DomainError("KernelLrvConfig: Psi and Xi must be positive");
  const double ps = psi_value(), xs = xi_value();
  if (!(ps > 0.0 && ps < 1.0) || !(xs > 0.0 && xs < 1.0))
    throw DomainError("KernelLrvConfig: psi and xi must lie in (0,1)");
}

KernelLrv::KernelLrv(Index dim, KernelLrvConfig config)
    : config_(config),
      dim_(dim),
      shift_(Vector::Zero(dim)),
      sum_(Vector::Zero(dim)),
      a0_(Matrix::Zero(dim, dim)),
      a_lambda_(Matrix::Zero(dim, dim)),
      b0_(Vector::Zero(dim)),
      b_lambda_(Vector::Zero(dim)) {
  if (dim < 1) throw DimensionError("KernelLrv: dimension must be positive");
  config_.validate();
}

std::size_t KernelLrv::s_at(std::size_t n) const {
  if (n <= 1) return 0;
  const double raw = std::floor(config_.Psi * std::pow(static_cast<double>(n), config_.psi_value()) +
                                kRoundingGuard);
  return std::min(static_cast<std::size_t>(std::max(raw, 0.0)), n - 1);
}

std::size_t KernelLrv::t_at(std::size_t n) const {
  if (n == 0) return 1;
  const double raw = std::ceil(config_.Xi * std::pow(static_cast<double>(n), config_.xi_value()) -
                               kRoundingGuard);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);
}

std::size_t KernelLrv::next_s_prime(std::size_t n, std::size_t s_prime_n) const {
  const double s_n = static_cast<double>(s_at(n));
  const double grown = static_cast<double>(s_prime_n + 1);
  // The recursion leaves "grown < s_n" undefined; it only arises when s
  // jumps by more than one, and resetting to s_{n+1} is the natural reading.
  if (grown >= config_.phi * s_n || grown < s_n) return s_at(n + 1);
  return std::min(s_prime_n + 1, n);
}

const double* KernelLrv::lag(std::size_t d) const {
  const std::size_t cap = static_cast<std::size_t>(ring_.cols());
  const std::size_t pos = (head_ + len_ - d) % cap;
  return ring_.col(static_cast<Index>(pos)).data();
}

void KernelLrv::append(const Vector& x) {
  std::size_t cap = static_cast<std::size_t>(ring_.cols());
  if (len_ == cap) {
    const std::size_t grown = std::max<std::size_t>(8, 2 * cap);
    Matrix fresh(dim_, static_cast<Index>(grown));
    for (std::size_t i = 0; i < len_; ++i)
      fresh.col(static_cast<Index>(i)) = ring_.col(static_cast<Index>((head_ + i) % cap));
    ring_ = std::move(fresh);
    head_ = 0;
    cap = grown;
  }
  ring_.col(static_cast<Index>((head_ + len_) % cap)) = x;
  ++len_;
}

void KernelLrv::trim() {
  // Largest window any future index can ask for: s'_{n+1} directly, or
  // s_m - (m - n - 1) for m > n, which is concave in m and peaks at
  // m* = (Psi psi)^(1/(1-psi)).
  const double n = static_cast<double>(n_);
  const double psi = config_.psi_value();
  const double m_star = std::pow(config_.Psi * psi, 1.0 / (1.0 - psi));
  const double m0 = std::max(n + 1.0, m_star);
  const double bound = config_.Psi * std::pow(m0, psi) - (m0 - n - 1.0);
  const std::size_t from_s = static_cast<std::size_t>(std::max(0.0, std::floor(bound + kRoundingGuard))) + 1;
  const std::size_t keep = std::min(n_, std::max(next_s_prime(n_, s_prime_), from_s));
  const std::size_t cap = static_cast<std::size_t>(ring_.cols());
  while (len_ > keep) {
    head_ = (head_ + 1) % cap;
    --len_;
  }
}

void KernelLrv::push(const VectorCRef& x) {
  if (x.size() != dim_) throw DimensionError("KernelLrv::push: dimension mismatch");
  if (n_ == 0) shift_ = x;
  const Vector xs = x - shift_;

  const std::size_t window = (n_ == 0) ? 0 : next_s_prime(n_, s_prime_);
  if (window > len_) throw std::logic_error("KernelLrv: window exceeds retained history");

  Vector s0 = Vector::Zero(dim_);
  Vector sl = Vector::Zero(dim_);
  double wl = 0.0;
  for (std::size_t d = 1; d <= window; ++d) {
    const Eigen::Map<const Vector> past(lag(d), dim_);
    const double w = int_pow(static_cast<double>(d), config_.lambda);
    s0 += past;
    sl += w * past;
    wl += w;
  }

  auto a0 = a0_.selfadjointView<Eigen::Lower>();
  a0.rankUpdate(xs);
  if (window > 0) {
    a0.rankUpdate(xs, s0);
    a_lambda_.selfadjointView<Eigen::Lower>().rankUpdate(xs, sl);
  }
  b0_ += static_cast<double>(window + 1) * xs + s0;
  b_lambda_ += wl * xs + sl;
  c0_ += 2.0 * static_cast<double>(window) + 1.0;
  c_lambda_ += 2.0 * wl;
  sum_ += xs;

  append(xs);
  ++n_;
  s_prime_ = window;
  trim();
}

void KernelLrv::push_rows(const MatrixCRef& rows) {
  for (Index i = 0; i < rows.rows(); ++i) push(rows.row(i).transpose());
}

Matrix KernelLrv::query_raw() const {
  if (n_ < 2) throw Underflow("KernelLrv::query: need at least two observations");
  const double n = static_cast<double>(n_);
  const double tl = int_pow(static_cast<double>(t_at(n_)), config_.lambda);
  const Vector mean = sum_ / n;

  Matrix a = a0_.selfadjointView<Eigen::Lower>();
  a -= Matrix(a_lambda_.selfadjointView<Eigen::Lower>()) / tl;
  const Vector b = b0_ - b_lambda_ / tl;
  const double c = c0_ - c_lambda_ / tl;

  Matrix out = a - b * mean.transpose() - mean * b.transpose() + c * mean * mean.transpose();
  out /= n;
  return 0.5 * (out + out.transpose());
}

Matrix KernelLrv::query() const { return pd_adjust(query_raw()); }

bool KernelLrv::ready() const { return n_ >= std::max<std::size_t>(2, config_.pilot); }

KernelLrv::State KernelLrv::state() const {
  State st;
  st.config = config_;
  st.dim = dim_;
  st.n = n_;
  st.s_prime = s_prime_;
  st.shift = shift_;
  st.sum = sum_;
  st.a0 = a0_;
  st.a_lambda = a_lambda_;
  st.b0 = b0_;
  st.b_lambda = b_lambda_;
  st.c0 = c0_;
  st.c_lambda = c_lambda_;
  st.window.resize(dim_, static_cast<Index>(len_));
  for (std::size_t i = 0; i < len_; ++i)
    st.window.col(static_cast<Index>(i)) = Eigen::Map<const Vector>(lag(len_ - i), dim_);
  return st;
}

KernelLrv KernelLrv::restore(const State& st) {
  KernelLrv k(st.dim, st.config);
  auto check = [&](Index rows, Index cols, const Matrix& m) {
    if (m.rows() != rows || m.cols() != cols) throw FormatError("KernelLrv::restore: inconsistent shapes");
  };
  check(st.dim, st.dim, st.a0);
  check(st.dim, st.dim, st.a_lambda);
  if (st.shift.size() != st.dim || st.sum.size() != st.dim || st.b0.size() != st.dim ||
      st.b_lambda.size() != st.dim || st.window.rows() != st.dim)
    throw FormatError("KernelLrv::restore: inconsistent shapes");
  k.n_ = st.n;
  k.s_prime_ = st.s_prime;
  k.shift_ = st.shift;
  k.sum_ = st.sum;
  k.a0_ = st.a0;
  k.a_lambda_ = st.a_lambda;
  k.b0_ = st.b0;
  k.b_lambda_ = st.b_lambda;
  k.c0_ = st.c0;
  k.c_lambda_ = st.c_lambda;
  for (Index i = 0; i < st.window.cols(); ++i) k.append(st.window.col(i));
  return k;
}

}  // namespace ogmm::lrv
