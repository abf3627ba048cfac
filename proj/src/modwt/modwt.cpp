#include "ogmm/modwt/modwt.hpp"

#include "ogmm/errors.hpp"

#include <algorithm>
#include <limits>

namespace ogmm::modwt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_levels(int levels) {
  if (levels < 1 || levels > 30) throw DomainError("MODWT: levels must lie in 1..30");
}

}  // namespace

Matrix modwt_offline(const VectorCRef& y, int levels) {
  check_levels(levels);
  const Index n = y.size();
  Matrix w = Matrix::Constant(n, levels, kNaN);
  Vector input = y;
  Index first = 0;  // first defined index of `input` (0-based)
  for (int j = 0; j < levels; ++j) {
    const Index tau = Index{1} << j;
    Vector smooth = Vector::Constant(n, kNaN);
    for (Index t = first + tau; t < n; ++t) {
      w(t, j) = 0.5 * input(t) - 0.5 * input(t - tau);
      smooth(t) = 0.5 * input(t) + 0.5 * input(t - tau);
    }
    input = std::move(smooth);
    first += tau;
  }
  return w;
}

OnlineModwt::OnlineModwt(int levels) : levels_(levels) {
  check_levels(levels);
  queues_.resize(static_cast<std::size_t>(levels));
  for (int j = 0; j < levels; ++j) queues_[static_cast<std::size_t>(j)].buf.assign(std::size_t{1} << j, 0.0);
}

int OnlineModwt::push(double y, Vector& w) {
  w.setConstant(levels_, kNaN);
  ++n_;
  double input = y;
  for (int j = 0; j < levels_; ++j) {
    Fifo& f = queues_[static_cast<std::size_t>(j)];
    const std::size_t tau = f.buf.size();
    if (f.size < tau) {
      f.buf[(f.head + f.size) % tau] = input;
      ++f.size;
      return j;
    }
    const double old = f.buf[f.head];
    w(j) = 0.5 * input - 0.5 * old;
    f.buf[f.head] = input;  // pop oldest, push newest
    f.head = (f.head + 1) % tau;
    input = 0.5 * input + 0.5 * old;
  }
  return levels_;
}

ModwtInit modwt_init(const VectorCRef& y, int levels) {
  check_levels(levels);
  const Index n = y.size();
  if (n <= (Index{1} << levels)) throw TooShort("modwt_init: series must be longer than 2^levels");
  ModwtInit out{OnlineModwt(levels), modwt_offline(y, levels)};

  // Level j consumes the level j-1 smooth; rebuild those inputs to prime
  // each queue with its last 2^j values.
  Vector input = y;
  Index first = 0;
  for (int j = 0; j < levels; ++j) {
    const Index tau = Index{1} << j;
    auto& f = out.state.queues_[static_cast<std::size_t>(j)];
    const Index defined = n - first;
    const Index keep = std::max<Index>(0, std::min(tau, defined));
    for (Index i = 0; i < keep; ++i) f.buf[static_cast<std::size_t>(i)] = input(n - keep + i);
    f.head = 0;
    f.size = static_cast<std::size_t>(keep);
    Vector smooth = Vector::Constant(n, kNaN);
    for (Index t = first + tau; t < n; ++t) smooth(t) = 0.5 * input(t) + 0.5 * input(t - tau);
    input = std::move(smooth);
    first += tau;
  }
  out.state.n_ = static_cast<std::size_t>(n);
  return out;
}

Matrix WaveletFeed::push(const VectorCRef& y) {
  Matrix rows(y.size(), modwt_.levels());
  Index filled = 0;
  Vector w;
  for (Index i = 0; i < y.size(); ++i) {
    if (modwt_.push(y(i), w) == modwt_.levels()) rows.row(filled++) = w.transpose();
  }
  rows.conservativeResize(filled, Eigen::NoChange);
  return rows;
}

}  // namespace ogmm::modwt
