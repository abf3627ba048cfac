#include "ogmm/core/weighting.hpp"

#include "ogmm/core/linalg.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/lrv/pd_adjust.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ogmm::core {

const char* to_string(WeightingMode mode) {
  switch (mode) {
    case WeightingMode::Fixed: return "fixed";
    case WeightingMode::Welford: return "welford";
    case WeightingMode::KernelLrv: return "klrv";
  }
  return "unknown";
}

WeightingMode weighting_mode_from_string(const std::string& name) {
  if (name == "fixed") return WeightingMode::Fixed;
  if (name == "welford") return WeightingMode::Welford;
  if (name == "klrv") return WeightingMode::KernelLrv;
  throw DomainError("unknown weighting mode '" + name + "'");
}

Weighting Weighting::fixed(Matrix w) {
  if (w.rows() != w.cols() || w.rows() == 0) throw DimensionError("fixed weighting must be square");
  Weighting out;
  out.mode_ = WeightingMode::Fixed;
  out.w_ = 0.5 * (w + w.transpose());
  return out;
}

Weighting Weighting::welford(Index q, std::size_t pilot) {
  Weighting out;
  out.mode_ = WeightingMode::Welford;
  out.w_ = Matrix::Identity(q, q);
  out.pilot_ = pilot;
  out.welford_.emplace(q);
  return out;
}

Weighting Weighting::kernel(Index q, lrv::KernelLrvConfig cfg) {
  Weighting out;
  out.mode_ = WeightingMode::KernelLrv;
  out.w_ = Matrix::Identity(q, q);
  out.pilot_ = cfg.pilot;
  out.kernel_.emplace(q, cfg);
  return out;
}

std::size_t Weighting::count() const {
  if (welford_) return welford_->count();
  if (kernel_) return kernel_->count();
  return 0;
}

bool Weighting::ready() const {
  if (mode_ == WeightingMode::Fixed) return true;
  return count() >= std::max<std::size_t>(2, pilot_);
}

void Weighting::absorb(const MatrixCRef& moment_rows) {
  if (mode_ == WeightingMode::Fixed) return;
  if (moment_rows.cols() != dim()) throw DimensionError("Weighting::absorb: moment dimension mismatch");
  if (welford_) welford_->push_rows(moment_rows);
  if (kernel_) kernel_->push_rows(moment_rows);
  refresh();
}

void Weighting::refresh() {
  if (!ready()) return;
  w_ = spd_inverse(variance());
}

Matrix Weighting::variance() const {
  switch (mode_) {
    case WeightingMode::Fixed:
      throw std::logic_error("fixed weighting carries no variance estimate");
    case WeightingMode::Welford:
      if (welford_->count() < 2) throw Underflow("Welford variance needs at least two observations");
      return lrv::pd_adjust(welford_->variance());
    case WeightingMode::KernelLrv:
      return kernel_->query();
  }
  throw std::logic_error("unreachable weighting mode");
}

Weighting Weighting::restore(WeightingMode mode, Matrix w, std::size_t pilot, std::optional<lrv::Welford> welford,
                             std::optional<lrv::KernelLrv> kernel) {
  Weighting out;
  out.mode_ = mode;
  out.w_ = std::move(w);
  out.pilot_ = pilot;
  out.welford_ = std::move(welford);
  out.kernel_ = std::move(kernel);
  if (mode == WeightingMode::Welford && !out.welford_) throw FormatError("welford weighting without state");
  if (mode == WeightingMode::KernelLrv && !out.kernel_) throw FormatError("klrv weighting without state");
  return out;
}

}  // namespace ogmm::core
