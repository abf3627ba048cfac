#include "ogmm/simgen/models.hpp"

#include "ogmm/errors.hpp"
#include "ogmm/inference/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace ogmm::simgen {

namespace {

constexpr int kBurnIn = 1000;

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<std::string> named(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// ---------------------------------------------------------------- model 1

class HeteroskedasticIv final : public Generator {
 public:
  explicit HeteroskedasticIv(std::uint64_t seed) : rng_(seed) {}

  Matrix next(Index n) override {
    Matrix out(n, obs_dim());
    Vector z(kQ);
    for (Index r = 0; r < n; ++r) {
      z(0) = rng_.normal();
      for (Index j = 1; j < kQ; ++j) z(j) = kRho * z(j - 1) + std::sqrt(1.0 - kRho * kRho) * rng_.normal();
      const double nu = rng_.normal(), eps = rng_.normal();
      Vector x(kP);
      for (Index j = 1; j < kP; ++j) x(j) = z(j - 1);
      x(0) = 0.1 * x.tail(kP - 1).sum() + 0.5 * z.segment(kP - 1, kQ - kP + 1).sum() + nu;
      const double y = x.sum() + 5.0 * std::exp(z(kQ - 1)) * (nu + eps);
      out(r, 0) = y;
      out.row(r).segment(1, kP) = x.transpose();
      out.row(r).tail(kQ) = z.transpose();
    }
    produced_ += static_cast<std::size_t>(n);
    return out;
  }

  Index obs_dim() const override { return 1 + kP + kQ; }
  Vector theta_star() const override { return Vector::Ones(kP); }
  std::vector<std::string> columns() const override {
    std::vector<std::string> c{"y"};
    for (const auto& s : named("x", kP)) c.push_back(s);
    for (const auto& s : named("z", kQ)) c.push_back(s);
    return c;
  }
  Index num_regressors() const override { return kP; }
  Index num_instruments() const override { return kQ; }

 private:
  static constexpr Index kP = 5, kQ = 20;
  static constexpr double kRho = 0.5;
  Rng rng_;
};

// ---------------------------------------------------------------- model 2

class ArmaIv final : public Generator {
 public:
  explicit ArmaIv(std::uint64_t seed) : rng_(seed), y_(7, 0.0), e_(2, 0.0) {
    for (int i = 0; i < kBurnIn; ++i) advance();
  }

  Matrix next(Index n) override {
    Matrix out(n, obs_dim());
    for (Index r = 0; r < n; ++r) {
      const double y = advance();
      out(r, 0) = y;
      for (int lag = 1; lag <= 6; ++lag) out(r, lag) = y_[static_cast<std::size_t>(lag)];
    }
    produced_ += static_cast<std::size_t>(n);
    return out;
  }

  Index obs_dim() const override { return 7; }
  Vector theta_star() const override { return (Vector(2) << 1.4, -0.6).finished(); }
  std::vector<std::string> columns() const override { return {"y", "x1", "x2", "z1", "z2", "z3", "z4"}; }
  Index num_regressors() const override { return 2; }
  Index num_instruments() const override { return 4; }

 private:
  // Draws y_k; afterwards y_[0] = y_k and y_[lag] = y_{k-lag}.
  double advance() {
    const double eps = rng_.normal();
    const double y = 1.4 * y_[0] - 0.6 * y_[1] + 0.6 * e_[0] - 0.3 * e_[1] + eps;
    y_.push_front(y);
    y_.pop_back();
    e_.push_front(eps);
    e_.pop_back();
    return y;
  }

  Rng rng_;
  std::deque<double> y_;
  std::deque<double> e_;
};

// ------------------------------------------------------- models 3, 4, 7, 8

// (z1, z2, nu, eps) with unit variances and correlation 0.5 within the
// pairs (z1, z2) and (nu, eps); optionally driven through VAR(1) with
// coefficient 0.5 on each coordinate.
class OveridDesign final : public Generator {
 public:
  OveridDesign(int model, double theta2, std::uint64_t seed)
      : model_(model), theta2_(theta2), dependent_(model == 4 || model == 8), rng_(seed), state_(Vector::Zero(4)) {
    Matrix cov = Matrix::Identity(4, 4);
    cov(0, 1) = cov(1, 0) = 0.5;
    cov(2, 3) = cov(3, 2) = 0.5;
    chol_ = cov.llt().matrixL();
    if (dependent_)
      for (int i = 0; i < kBurnIn; ++i) draw();
  }

  Matrix next(Index n) override {
    Matrix out(n, 4);
    for (Index r = 0; r < n; ++r) {
      const Vector u = draw();
      const std::size_t k = produced_ + static_cast<std::size_t>(r) + 1;
      const double z1 = u(0), z2 = u(1), nu = u(2), eps = u(3);
      const double x = z1 + z2 + nu;
      double slope = 1.0, shift = 0.0;
      if (model_ == 3 || model_ == 4) {
        shift = theta2_ * z1;
      } else {
        if (in_change_window(k)) slope += theta2_;
        if (in_misspec_window(k)) shift = theta2_ * z1;
      }
      out(r, 0) = slope * x + shift + eps;
      out(r, 1) = x;
      out(r, 2) = z1;
      out(r, 3) = z2;
    }
    produced_ += static_cast<std::size_t>(n);
    return out;
  }

  Index obs_dim() const override { return 4; }
  Vector theta_star() const override { return Vector::Ones(1); }
  std::vector<std::string> columns() const override { return {"y", "x1", "z1", "z2"}; }
  Index num_regressors() const override { return 1; }
  Index num_instruments() const override { return 2; }

 private:
  Vector draw() {
    Vector e(4);
    for (Index i = 0; i < 4; ++i) e(i) = rng_.normal();
    const Vector shock = chol_ * e;
    if (!dependent_) return shock;
    state_ = 0.5 * state_ + shock;
    return state_;
  }

  int model_;
  double theta2_;
  bool dependent_;
  Rng rng_;
  Matrix chol_;
  Vector state_;
};

// ------------------------------------------------------------ models 5, 6

class QuantileDesign final : public Generator {
 public:
  QuantileDesign(int model, double tau, std::uint64_t seed)
      : dependent_(model == 6), tau_(tau), rng_(seed), state_(Vector::Zero(kP)) {
    // Innovation covariance: unit variance for eps, AR(0.5) correlation
    // among the p - 1 regressor drivers, no cross terms.
    Matrix cov = Matrix::Zero(kP, kP);
    cov(0, 0) = 1.0;
    for (Index i = 1; i < kP; ++i)
      for (Index j = 1; j < kP; ++j) cov(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
    chol_ = cov.llt().matrixL();
    if (dependent_)
      for (int i = 0; i < kBurnIn; ++i) draw();
  }

  Matrix next(Index n) override {
    Matrix out(n, obs_dim());
    // Stationary sd of a VAR(1) coordinate with coefficient 0.5.
    const double sd = dependent_ ? std::sqrt(4.0 / 3.0) : 1.0;
    for (Index r = 0; r < n; ++r) {
      const Vector u = draw();
      out(r, 1) = 1.0;
      double y = 1.0 + u(0);
      for (Index j = 1; j < kP; ++j) {
        const double xj = std_normal_cdf(u(j) / sd);
        out(r, 1 + j) = xj;
        y += xj;
      }
      out(r, 0) = y;
    }
    produced_ += static_cast<std::size_t>(n);
    return out;
  }

  Index obs_dim() const override { return kP + 1; }
  Vector theta_star() const override {
    Vector t = Vector::Ones(kP);
    const double sd = dependent_ ? std::sqrt(4.0 / 3.0) : 1.0;
    t(0) = 1.0 + inference::normal_quantile(tau_) * sd;
    return t;
  }
  std::vector<std::string> columns() const override {
    std::vector<std::string> c{"y"};
    for (const auto& s : named("x", kP)) c.push_back(s);
    return c;
  }
  Index num_regressors() const override { return kP; }
  Index num_instruments() const override { return 0; }

 private:
  Vector draw() {
    Vector e(kP);
    for (Index i = 0; i < kP; ++i) e(i) = rng_.normal();
    const Vector shock = chol_ * e;
    if (!dependent_) return shock;
    state_ = 0.5 * state_ + shock;
    return state_;
  }

  static constexpr Index kP = 10;
  bool dependent_;
  double tau_;
  Rng rng_;
  Matrix chol_;
  Vector state_;
};

}  // namespace

bool in_change_window(std::size_t k) { return (k >= 2001 && k <= 2500) || (k >= 6001 && k <= 6500); }
bool in_misspec_window(std::size_t k) { return (k >= 4001 && k <= 4500) || (k >= 8001 && k <= 8500); }

std::unique_ptr<Generator> make_generator(const SimSpec& spec, std::uint64_t seed) {
  if (!std::isfinite(spec.theta2)) throw DomainError("simulation parameter theta2 must be finite");
  switch (spec.model) {
    case 1: return std::make_unique<HeteroskedasticIv>(seed);
    case 2: return std::make_unique<ArmaIv>(seed);
    case 3:
    case 4:
    case 7:
    case 8: return std::make_unique<OveridDesign>(spec.model, spec.theta2, seed);
    case 5:
    case 6:
      if (!(spec.tau > 0.0 && spec.tau < 1.0)) throw DomainError("quantile level must lie in (0,1)");
      return std::make_unique<QuantileDesign>(spec.model, spec.tau, seed);
    default: throw DomainError("unknown simulation model " + std::to_string(spec.model));
  }
}

Vector gmwm_signal(const VectorCRef& theta, Index n, std::uint64_t seed) {
  if (theta.size() < 3 || theta.size() % 2 == 0 || theta.size() > 7)
    throw DomainError("gmwm_signal: theta must hold 1 to 3 AR(1) pairs plus a white-noise variance");
  if (n < 1) throw DomainError("gmwm_signal: length must be positive");
  const Index k = (theta.size() - 1) / 2;
  double max_rho = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double rho = theta(2 * i), s2 = theta(2 * i + 1);
    if (!(rho >= 0.0 && rho < 1.0) || !(s2 >= 0.0)) throw DomainError("gmwm_signal: infeasible AR(1) parameters");
    max_rho = std::max(max_rho, rho);
  }
  if (!(theta(2 * k) >= 0.0)) throw DomainError("gmwm_signal: white-noise variance must be non-negative");

  Rng rng(seed);
  Vector state = Vector::Zero(k);
  Vector sd(k);
  for (Index i = 0; i < k; ++i) sd(i) = std::sqrt(theta(2 * i + 1));
  const double sd_wn = std::sqrt(theta(2 * k));
  const auto burn = static_cast<Index>(std::ceil(10.0 / (1.0 - max_rho)));
  for (Index t = 0; t < burn; ++t)
    for (Index i = 0; i < k; ++i) state(i) = theta(2 * i) * state(i) + sd(i) * rng.normal();

  Vector y(n);
  for (Index t = 0; t < n; ++t) {
    double v = 0.0;
    for (Index i = 0; i < k; ++i) {
      state(i) = theta(2 * i) * state(i) + sd(i) * rng.normal();
      v += state(i);
    }
    y(t) = v + sd_wn * rng.normal();
  }
  return y;
}

}  // namespace ogmm::simgen
