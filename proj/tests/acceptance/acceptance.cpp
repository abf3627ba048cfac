// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion
// numbers on the command line to run a subset.

#include "ogmm/core/estimator.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/inference/distributions.hpp"
#include "ogmm/inference/inference.hpp"
#include "ogmm/lrv/kernel_lrv.hpp"
#include "ogmm/modwt/modwt.hpp"
#include "ogmm/moments/gmwm.hpp"
#include "ogmm/moments/linear.hpp"
#include "ogmm/moments/quantile.hpp"
#include "ogmm/offline/offline.hpp"
#include "ogmm/sgmm/sgmm.hpp"
#include "ogmm/simgen/models.hpp"
#include "ogmm/simgen/rng.hpp"
#include "test_models.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

using namespace ogmm;
using testing_support::DirectOgmm;
using testing_support::ExpIvMoment;
using testing_support::Gen;
using testing_support::rel_diff;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string strf(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Empirical upper (1 - alpha) quantile used as a size-adjusted critical value.
double upper_quantile(std::vector<double> v, double alpha) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil((1.0 - alpha) * double(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

double rate_above(const std::vector<double>& v, double crit) {
  return double(std::count_if(v.begin(), v.end(), [&](double s) { return s > crit; })) / double(v.size());
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

// ---------------------------------------------------------------------------
// 1. Telescoping and direct bookkeeping agree.

Outcome telescoping_equivalence() {
  Gen gen(101);
  double worst = 0.0;
  int linear = 0, nonlinear = 0;
  for (int s = 0; s < 50; ++s) {
    const bool is_exp = s % 2 == 1;
    const bool inverse = (s / 2) % 2 == 1;
    const Index p = is_exp ? 2 : gen.integer(1, 3);
    const Index q = p + gen.integer(0, 2);
    const Vector truth = is_exp ? Vector((Vector(2) << 0.3, -0.2).finished()) : gen.vector(p);
    std::unique_ptr<core::MomentModel> model;
    if (is_exp)
      model = std::make_unique<ExpIvMoment>(p, q);
    else
      model = std::make_unique<moments::IvMoment>(p, q);
    auto rows = [&](Index n) {
      return is_exp ? testing_support::exp_iv_rows(gen, n, p, q, truth)
                    : testing_support::linear_iv_rows(gen, n, p, q, truth);
    };
    (is_exp ? nonlinear : linear)++;

    const core::Batch d1(rows(100));
    const Vector theta1 = truth + 0.05 * gen.vector(p);
    core::OgmmEstimator est(*model, {});
    est.init(d1, theta1, inverse ? core::Weighting::welford(q) : core::Weighting::identity(q));
    DirectOgmm direct(*model, d1, theta1, inverse);
    const int batches = gen.integer(2, 20);
    for (int b = 2; b <= batches; ++b) {
      const core::Batch db(rows(gen.integer(20, 80)));
      est.update(db);
      direct.update(db);
      const auto& st = est.state();
      worst = std::max({worst, rel_diff(st.theta, direct.theta()), rel_diff(st.Uprime, direct.uprime()),
                        rel_diff(st.Vprime, direct.v())});
    }
  }
  return {worst <= 1e-10, strf("%d linear + %d nonlinear streams, max rel diff %.2e (tol 1e-10)", linear,
                                nonlinear, worst)};
}

// ---------------------------------------------------------------------------
// 2. OLS moments reproduce pooled least squares.

Outcome exact_ols_recovery() {
  Gen gen(202);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index p = gen.integer(1, 6);
    const Vector beta = gen.vector(p);
    auto rows = [&](Index n) {
      Matrix m(n, p + 1);
      for (Index i = 0; i < n; ++i) {
        const Vector x = gen.vector(p);
        m(i, 0) = x.dot(beta) + 0.5 * gen.normal();
        m.row(i).tail(p) = x.transpose();
      }
      return m;
    };
    auto pooled = [&](const Matrix& all) {
      return Vector(all.rightCols(p).householderQr().solve(all.col(0)));
    };
    Matrix all = rows(p + gen.integer(5, 30));
    moments::OlsMoment model(p);
    core::OgmmEstimator est(model, {});
    est.init(core::Batch(all), pooled(all), core::Weighting::identity(p));
    const int batches = gen.integer(2, 15);
    for (int b = 2; b <= batches; ++b) {
      const Matrix db = rows(gen.integer(5, 50));
      est.update(core::Batch(db));
      Matrix grown(all.rows() + db.rows(), p + 1);
      grown << all, db;
      all = std::move(grown);
      worst = std::max(worst, rel_diff(est.state().theta, pooled(all)));
    }
  }
  return {worst <= 1e-10, strf("100 instances, every batch, max rel diff %.2e (tol 1e-10)", worst)};
}

// ---------------------------------------------------------------------------
// 3. Kernel long-run variance against the double sum, and the AR(1) check.

/// Direct evaluation of n^{-1} sum_{i,j} K_n(i,j) (X_i - mean)(X_j - mean)^T.
Matrix brute_kernel_lrv(const Matrix& x, const lrv::KernelLrvConfig& cfg) {
  const Index n = x.rows();
  const double psi = cfg.psi > 0 ? cfg.psi : 1.0 / (1.0 + 2.0 * cfg.lambda);
  const double xi = cfg.xi > 0 ? cfg.xi : 1.0 / (1.0 + 2.0 * cfg.lambda);
  auto s_of = [&](Index m) {
    return std::min<Index>(Index(std::floor(cfg.Psi * std::pow(double(m), psi) + 1e-9)), m - 1);
  };
  std::vector<Index> sp(n + 1, 0);
  for (Index m = 1; m < n; ++m) {
    const Index grown = sp[m] + 1;
    const Index sm = s_of(m);
    sp[m + 1] = (sm <= grown && double(grown) < cfg.phi * double(sm)) ? grown : s_of(m + 1);
  }
  const Index tn = std::clamp<Index>(Index(std::ceil(cfg.Xi * std::pow(double(n), xi) - 1e-9)), 1, n);
  const double tl = std::pow(double(tn), cfg.lambda);

  const Matrix c = x.rowwise() - x.colwise().mean();
  Matrix out = c.transpose() * c;
  for (Index i = 1; i <= n; ++i)
    for (Index j = 1; j < i; ++j) {
      if (i - j > sp[i]) continue;
      const double k = 1.0 - std::pow(double(i - j), cfg.lambda) / tl;
      const Matrix pair = c.row(i - 1).transpose() * c.row(j - 1);
      out += k * (pair + pair.transpose());
    }
  return out / double(n);
}

Outcome kernel_lrv_correctness() {
  Gen gen(303);
  double worst = 0.0;
  int streams = 0;
  for (int lambda : {1, 3})
    for (double phi : {1.0, 2.0})
      for (auto [Psi, Xi] : {std::pair{1.0, 1.0}, std::pair{3.0, 2.0}})
        for (int rep = 0; rep < 3; ++rep) {
          lrv::KernelLrvConfig cfg;
          cfg.lambda = lambda;
          cfg.phi = phi;
          cfg.Psi = Psi;
          cfg.Xi = Xi;
          const Index dim = gen.integer(1, 3);
          const Matrix x = gen.matrix(200, dim).array() + 3.0;
          lrv::KernelLrv k(dim, cfg);
          for (Index n = 1; n <= 200; ++n) {
            k.push(x.row(n - 1).transpose());
            if (n < 2) continue;
            worst = std::max(worst, rel_diff(k.query_raw(), brute_kernel_lrv(x.topRows(n), cfg)));
          }
          ++streams;
        }

  // AR(1), rho = 0.5, unit innovations: long-run variance 1 / (1 - rho)^2 = 4.
  double total = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    simgen::Rng rng(9000 + seed);
    lrv::KernelLrv k(1, {});
    Vector v(1);
    double z = rng.normal() / std::sqrt(0.75);
    for (int n = 0; n < 100000; ++n) {
      v(0) = z;
      k.push(v);
      z = 0.5 * z + rng.normal();
    }
    total += k.query()(0, 0);
  }
  const double mean_est = total / 100.0;
  const double rel = std::abs(mean_est - 4.0) / 4.0;
  const bool pass = worst <= 1e-10 && rel <= 0.20;
  return {pass, strf("%d streams, all prefixes 2..200: max rel diff %.2e (tol 1e-10); AR(1) mean estimate %.4f vs 4 "
                     "(rel err %.3f, tol 0.20)",
                     streams, worst, mean_est, rel)};
}

// ---------------------------------------------------------------------------
// 4. Coverage on the ARMA instrumental design.

Outcome coverage_model2() {
  const int reps = 200, n_b = 2000, batches = 25;
  moments::IvMoment model(2, 4);
  int covered1 = 0, covered2 = 0, failures = 0;
  for (int rep = 0; rep < reps; ++rep) {
    try {
      auto gen = simgen::make_generator({2, 0.0, 0.1}, 40000 + rep);
      const core::Batch d1 = gen->next_batch(n_b);
      offline::TwoStepOptions opts;
      opts.lrv = offline::LrvChoice::Bartlett;
      const auto init = offline::twostep_gmm(model, d1, opts);
      core::OgmmEstimator est(model, {});
      est.init(d1, init.theta, core::Weighting::kernel(4, {}));
      for (int b = 2; b <= batches; ++b) est.update(gen->next_batch(n_b));
      const auto& st = est.state();
      const Matrix sigma = st.weighting.variance();
      const Vector truth = gen->theta_star();
      const auto [lo1, hi1] = inference::marginal_interval(st, sigma, 0, 0.05);
      const auto [lo2, hi2] = inference::marginal_interval(st, sigma, 1, 0.05);
      covered1 += truth(0) >= lo1 && truth(0) <= hi1;
      covered2 += truth(1) >= lo2 && truth(1) <= hi2;
    } catch (const std::exception&) {
      ++failures;  // counted as not covered
    }
  }
  const double c1 = double(covered1) / reps, c2 = double(covered2) / reps;
  return {within(c1, 0.91, 0.98),
          strf("N=%d, %d reps: coverage theta1 %.3f (band [0.91, 0.98]), theta2 %.3f, failures %d", n_b * batches,
               reps, c1, c2, failures)};
}

// ---------------------------------------------------------------------------
// 5. Over-identification test calibration.

struct OveridStats {
  std::vector<double> ogmm, sgmm;
  int failures = 0;
};

OveridStats overid_run(double theta2, int reps) {
  moments::IvMoment model(1, 2);
  OveridStats out;
  for (int rep = 0; rep < reps; ++rep) {
    try {
      auto gen = simgen::make_generator({3, theta2, 0.1}, 50000 + rep);
      const core::Batch d1 = gen->next_batch(200);
      const auto init = offline::twostep_gmm(model, d1);
      core::OgmmEstimator est(model, {});
      est.init(d1, init.theta, core::Weighting::welford(2));
      sgmm::Sgmm sg(model, d1, init.theta, {});
      sg.push(d1);
      // N_b = 100 * 2^b for b = 1..5
      for (int b = 2; b <= 5; ++b) {
        const core::Batch db = gen->next_batch(100 << (b - 1));
        est.update(db);
        sg.push(db);
      }
      const auto& st = est.state();
      out.ogmm.push_back(inference::sargan_hansen(st, st.weighting.variance()).statistic);
      out.sgmm.push_back(sg.overident().statistic);
    } catch (const std::exception&) {
      ++out.failures;
    }
  }
  return out;
}

Outcome sargan_calibration() {
  const int reps = 500;
  const OveridStats null = overid_run(0.0, reps);
  const OveridStats alt = overid_run(0.4, reps);
  const double crit = inference::chisq_quantile(0.95, 1);
  const double size = rate_above(null.ogmm, crit);
  const double power = rate_above(alt.ogmm, upper_quantile(null.ogmm, 0.05));
  const double sgmm_size = rate_above(null.sgmm, crit);
  const bool pass = within(size, 0.033, 0.070) && power >= 0.85 && !within(sgmm_size, 0.033, 0.070) &&
                    null.failures == 0 && alt.failures == 0;
  return {pass, strf("N=3200, %d reps: OGMM size %.3f (band [0.033, 0.070]), size-adjusted power %.3f (>= 0.85); "
                     "SGMM size %.3f (must fall outside band); failures %d/%d",
                     reps, size, power, sgmm_size, null.failures, alt.failures)};
}

// ---------------------------------------------------------------------------
// 6. Anomaly and stability statistics.

struct AnomalyStats {
  // [b][rep], b = 2..17 stored at b - 2
  std::vector<std::vector<double>> tf, tu;
  int failures = 0;
};

AnomalyStats anomaly_run(double theta2, int reps, int batches, int n_b) {
  moments::IvMoment model(1, 2);
  AnomalyStats out;
  out.tf.assign(batches - 1, {});
  out.tu.assign(batches - 1, {});
  for (int rep = 0; rep < reps; ++rep) {
    try {
      auto gen = simgen::make_generator({7, theta2, 0.1}, 60000 + rep);
      const core::Batch d1 = gen->next_batch(n_b);
      const auto init = offline::twostep_gmm(model, d1);
      const core::OgmmState ref = core::init_state(model, d1, init.theta, core::Weighting::welford(2));
      const auto snap = inference::AnomalySnapshot::from_state(ref);
      std::vector<double> tf, tu;
      for (int b = 2; b <= batches; ++b) {
        const core::Batch db = gen->next_batch(n_b);
        tf.push_back(inference::anomaly_tf_update(ref, model, db).first.statistic);
        tu.push_back(inference::anomaly_tu(snap, model, db).statistic);
      }
      for (int i = 0; i < batches - 1; ++i) {
        out.tf[i].push_back(tf[i]);
        out.tu[i].push_back(tu[i]);
      }
    } catch (const std::exception&) {
      ++out.failures;
    }
  }
  return out;
}

Outcome anomaly_tests() {
  const int reps = 500, batches = 17, n_b = 500;
  const AnomalyStats null = anomaly_run(0.0, reps, batches, n_b);
  const AnomalyStats alt = anomaly_run(0.2, reps, batches, n_b);
  const double crit_f = inference::chisq_quantile(0.95, 3);  // 2q - p
  const double crit_u = inference::chisq_quantile(0.95, 2);  // 2(q - p)
  bool pass = null.failures == 0 && alt.failures == 0;

  double null_lo = 1.0, null_hi = 0.0;
  int null_lo_b = 0, null_hi_b = 0;
  for (int b = 2; b <= batches; ++b) {
    for (double r : {rate_above(null.tf[b - 2], crit_f), rate_above(null.tu[b - 2], crit_u)}) {
      if (r < null_lo) null_lo = r, null_lo_b = b;
      if (r > null_hi) null_hi = r, null_hi_b = b;
    }
  }
  pass = pass && null_lo >= 0.03 && null_hi <= 0.08;

  auto tf_adjusted = [&](int b) { return rate_above(alt.tf[b - 2], upper_quantile(null.tf[b - 2], 0.05)); };
  const double tf5 = tf_adjusted(5), tf9 = tf_adjusted(9);
  const double tu5 = rate_above(alt.tu[5 - 2], crit_u), tu9 = rate_above(alt.tu[9 - 2], crit_u);
  pass = pass && tf5 >= 0.5 && tf9 >= 0.5 && tu9 >= 0.5 && within(tu5, 0.02, 0.09);
  return {pass, strf("%d reps, n_b=%d: T_F size-adj power b=5 %.3f, b=9 %.3f (>= 0.5); T_U b=9 %.3f (>= 0.5), b=5 "
                     "%.3f (band [0.02, 0.09]); null rates over b=2..%d in [%.3f (b=%d), %.3f (b=%d)] (band [0.03, "
                     "0.08]); failures %d/%d",
                     reps, n_b, tf5, tf9, tu9, tu5, batches, null_lo, null_lo_b, null_hi, null_hi_b, null.failures,
                     alt.failures)};
}

// ---------------------------------------------------------------------------
// 7. Streaming MODWT.

bool same_bits(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::memcmp(&a, &b, sizeof a) == 0;
}

Outcome online_modwt() {
  Gen gen(707);
  int mismatches = 0;
  for (int s = 0; s < 100; ++s) {
    const int levels = gen.integer(1, 10);
    const Index n = gen.integer((1 << levels) + 1, 10000);
    const Vector y = gen.vector(n) * gen.uniform(0.1, 10.0);
    const Matrix offline = modwt::modwt_offline(y, levels);

    modwt::OnlineModwt online(levels);
    Vector w;
    for (Index t = 0; t < n; ++t) {
      online.push(y(t), w);
      for (int j = 0; j < levels; ++j) mismatches += !same_bits(w(j), offline(t, j));
    }
    // Primed state continues the same transform.
    const Index split = gen.integer((1 << levels) + 1, int(n));
    auto init = modwt::modwt_init(y.head(split), levels);
    for (Index t = 0; t < split; ++t)
      for (int j = 0; j < levels; ++j) mismatches += !same_bits(init.coefficients(t, j), offline(t, j));
    for (Index t = split; t < n; ++t) {
      init.state.push(y(t), w);
      for (int j = 0; j < levels; ++j) mismatches += !same_bits(w(j), offline(t, j));
    }
  }

  // Per-push time in the first and last deciles of a 1e5 stream, median of repeats.
  const Index n = 100000, decile = n / 10;
  const Vector y = Gen(708).vector(n);
  std::vector<double> first, last;
  volatile double sink = 0.0;
  for (int rep = 0; rep < 21; ++rep) {
    modwt::OnlineModwt online(10);
    Vector w;
    for (int d = 0; d < 10; ++d) {
      const auto t0 = Clock::now();
      for (Index t = d * decile; t < (d + 1) * decile; ++t) online.push(y(t), w);
      const double dt = seconds_since(t0);
      sink = sink + w(0);
      if (d == 0) first.push_back(dt);
      if (d == 9) last.push_back(dt);
    }
  }
  const double ratio = median(last) / median(first);
  return {mismatches == 0 && ratio < 2.0,
          strf("100 series: %d bit mismatches; late/early decile time ratio %.3f (< 2)", mismatches, ratio)};
}

// ---------------------------------------------------------------------------
// 8. Wavelet-variance moments.

Outcome gmwm_suite() {
  const Index levels = 10;
  const Vector theta_star = (Vector(5) << 0.99, 1e-8, 0.6, 1e-7, 4e-8).finished();

  // Analytic Jacobian against central differences.
  Gen gen(808);
  double worst_fd = 0.0;
  for (int k = 1; k <= 3; ++k) {
    moments::GmwmMoment m(k, levels);
    for (int trial = 0; trial < 20; ++trial) {
      Vector theta(2 * k + 1);
      for (int i = 0; i < k; ++i) {
        theta(2 * i) = gen.uniform(0.01, 0.999);
        theta(2 * i + 1) = gen.uniform(1e-9, 1e-6);
      }
      theta(2 * k) = gen.uniform(1e-9, 1e-6);
      const Matrix jac = m.nu_jacobian(theta);
      for (Index c = 0; c < theta.size(); ++c) {
        const double h = 1e-6 * std::abs(theta(c));
        Vector tp = theta, tm = theta;
        tp(c) += h;
        tm(c) -= h;
        const Vector fd = (m.nu_all(tp) - m.nu_all(tm)) / (2 * h);
        worst_fd = std::max(worst_fd, (jac.col(c) - fd).norm() / fd.norm());
      }
    }
  }

  // Haar wavelet variances of a long simulated signal.
  moments::GmwmMoment model(2, levels);
  const Vector y = simgen::gmwm_signal(theta_star, 1000000, 8080);
  const Matrix w = modwt::WaveletFeed(int(levels)).push(y);
  double worst_wv = 0.0;
  for (Index j = 1; j <= levels; ++j) {
    const double wv = w.col(j - 1).squaredNorm() / double(w.rows());
    worst_wv = std::max(worst_wv, std::abs(wv - model.nu(theta_star, j)) / model.nu(theta_star, j));
  }

  // Two-step fit on repeated simulated series.
  const int reps = 50;
  const Vector start = (Vector(5) << 0.9, 5e-9, 0.3, 5e-8, 1e-8).finished();
  std::vector<Vector> estimates;
  int failures = 0;
  for (int rep = 0; rep < reps; ++rep) {
    try {
      const Vector series = simgen::gmwm_signal(theta_star, 120000, 81000 + rep);
      const Matrix rows = modwt::WaveletFeed(int(levels)).push(series);
      // Data-driven moment scale so the scaled moments are of order one.
      const double scale = double(rows.rows()) / rows.col(0).squaredNorm();
      moments::GmwmMoment scaled(2, levels, scale);
      const auto [lo, hi] = scaled.box();
      offline::TwoStepOptions opts;
      opts.lrv = offline::LrvChoice::Kernel;
      opts.gn.lower = lo;
      opts.gn.upper = hi;
      opts.theta_start = start;
      estimates.push_back(scaled.canonical(offline::twostep_gmm(scaled, core::Batch(rows), opts).theta));
    } catch (const std::exception&) {
      ++failures;
    }
  }
  bool recovered = !estimates.empty() && failures == 0;
  std::string zs;
  if (!estimates.empty()) {
    Vector mean = Vector::Zero(5), sq = Vector::Zero(5);
    for (const auto& e : estimates) mean += e;
    mean /= double(estimates.size());
    for (const auto& e : estimates) sq += (e - mean).cwiseAbs2();
    const Vector sd = (sq / double(estimates.size() - 1)).cwiseSqrt();
    for (Index c = 0; c < 5; ++c) {
      const double z = std::abs(mean(c) - theta_star(c)) / sd(c);
      recovered = recovered && z <= 3.0;
      zs += strf("%s%.2f", c ? ", " : "", z);
    }
  }
  const bool pass = worst_fd < 1e-5 && worst_wv <= 0.05 && recovered;
  return {pass, strf("FD max rel err %.2e (< 1e-5); WV max rel err %.3f at n=1e6 (<= 0.05); two-step %d reps, "
                     "|mean - theta*| / MC sd = [%s] (<= 3), failures %d",
                     worst_fd, worst_wv, reps, zs.c_str(), failures)};
}

// ---------------------------------------------------------------------------
// 9. Cost scaling.

Outcome cost_scaling() {
  moments::IvMoment model(2, 4);
  const int n_b = 2000, batches = 100, streams = 15;
  auto time_updates = [&](bool kernel) {
    std::vector<double> early, late;
    for (int s = 0; s < streams; ++s) {
      auto gen = simgen::make_generator({2, 0.0, 0.1}, 90000 + s);
      std::vector<core::Batch> data;
      for (int b = 0; b < batches; ++b) data.push_back(gen->next_batch(n_b));
      core::OgmmEstimator est(model, {});
      est.init(data[0], gen->theta_star(),
               kernel ? core::Weighting::kernel(4, {}) : core::Weighting::welford(4));
      for (int b = 2; b <= batches; ++b) {
        const auto t0 = Clock::now();
        est.update(data[b - 1]);
        const double dt = seconds_since(t0);
        if (b == 2) early.push_back(dt);
        if (b == batches) late.push_back(dt);
      }
    }
    return median(late) / median(early);
  };
  const double ratio = time_updates(false);
  const double ratio_kernel = time_updates(true);

  // Retained history of the kernel estimator against Psi N^psi.
  long worst_excess = -1000000;
  for (int lambda : {1, 3}) {
    lrv::KernelLrvConfig cfg;
    cfg.lambda = lambda;
    lrv::KernelLrv k(4, cfg);
    simgen::Rng rng(99);
    Vector x(4);
    for (std::size_t n = 1; n <= 1000000; ++n) {
      for (Index i = 0; i < 4; ++i) x(i) = rng.normal();
      k.push(x);
      const double bound = cfg.Psi * std::pow(double(n), cfg.psi_value());
      worst_excess = std::max(worst_excess, long(k.buffer_length()) - long(std::floor(bound)));
    }
  }
  const bool pass = ratio < 2.0 && worst_excess <= 2;
  return {pass, strf("batch-100/batch-2 update time ratio %.3f (< 2, Welford weighting; kernel weighting %.3f incl. "
                     "window growth); buffer - floor(Psi N^psi) <= %ld over N <= 1e6 (<= 2)",
                     ratio, ratio_kernel, worst_excess)};
}

// ---------------------------------------------------------------------------
// 10. Quantile regression against the interval-scheduled baseline.

Outcome quantile_regression() {
  const int reps = 200, n_b = 2000, batches = 50;
  const double tau = 0.1;
  moments::SmoothedQuantileMoment model(10, tau);
  const Vector j = Vector::Ones(10);
  std::vector<double> err_ogmm, err_leqr;
  int covered = 0, failures = 0;
  for (int rep = 0; rep < reps; ++rep) {
    try {
      auto gen = simgen::make_generator({5, 0.0, tau}, 100000 + rep);
      const Matrix d1 = gen->next(n_b);
      const Vector theta1 = offline::initial_quantile_fit(d1.col(0), d1.rightCols(10), tau);
      core::OgmmEstimator est(model, {});
      est.init(core::Batch(d1), theta1, core::Weighting::kernel(10, {}));
      moments::Leqr leqr(10, {tau, 2000.0}, theta1, std::size_t(n_b));
      leqr.push(d1);
      for (int b = 2; b <= batches; ++b) {
        const Matrix db = gen->next(n_b);
        est.update(core::Batch(db));
        leqr.push(db);
      }
      const Vector truth = gen->theta_star();
      const auto& st = est.state();
      err_ogmm.push_back((st.theta - truth).cwiseAbs().mean());
      err_leqr.push_back((leqr.estimate() - truth).cwiseAbs().mean());
      const auto [lo, hi] = inference::linear_interval(st, st.weighting.variance(), j, 0.05);
      covered += j.dot(truth) >= lo && j.dot(truth) <= hi;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  const double mae_o = err_ogmm.empty() ? NAN : median(err_ogmm);
  const double mae_l = err_leqr.empty() ? NAN : median(err_leqr);
  const double cov = double(covered) / reps;
  const bool pass = mae_o <= 1.05 * mae_l && within(cov, 0.90, 0.985);
  return {pass, strf("N=%d, %d reps: MAE OGMM %.5f vs LEQR %.5f (ratio %.3f, <= 1.05); coverage of J^T theta %.3f "
                     "(band [0.90, 0.985]); failures %d",
                     n_b * batches, reps, mae_o, mae_l, mae_o / mae_l, cov, failures)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "telescoping equivalence", 60, telescoping_equivalence},
      {2, "exact OLS recovery", 60, exact_ols_recovery},
      {3, "kernel LRV correctness", 300, kernel_lrv_correctness},
      {4, "coverage, ARMA IV design", 900, coverage_model2},
      {5, "over-identification test calibration", 600, sargan_calibration},
      {6, "anomaly and stability tests", 900, anomaly_tests},
      {7, "online MODWT", 120, online_modwt},
      {8, "wavelet-variance moments", 600, gmwm_suite},
      {9, "cost scaling", 1e300, cost_scaling},
      {10, "quantile regression", 1e300, quantile_regression},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    const bool in_budget = dt < c.budget_s;
    const bool pass = out.pass && in_budget;
    failed += !pass;
    std::string budget = c.budget_s < 1e299 ? strf(", budget %.0f s", c.budget_s) : std::string();
    std::printf("%s criterion %d (%s): %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), dt,
                budget.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
