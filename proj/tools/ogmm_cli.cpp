// Command-line front end: simulate, estimate, test, bench, replay.
//
// Exit codes: 0 success, 2 usage or input errors, 3 numerical failures.

#include "ogmm/core/estimator.hpp"
#include "ogmm/core/snapshot.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/harness/experiment.hpp"
#include "ogmm/inference/inference.hpp"
#include "ogmm/moments/linear.hpp"
#include "ogmm/moments/quantile.hpp"
#include "ogmm/offline/offline.hpp"
#include "ogmm/simgen/csv.hpp"
#include "ogmm/simgen/models.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace ogmm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Output stream that is stdout unless a path is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw UsageError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

simgen::CsvTable read_input(const std::string& path) {
  if (path.empty() || path == "-") return simgen::read_csv(std::cin);
  return simgen::read_csv_file(path);
}

/// Moment model named on the command line, sized from the CSV header
/// (y, x1..xp, z1..zq).
struct ModelChoice {
  std::unique_ptr<core::MomentModel> model;
  Index p = 0, q = 0;
};

ModelChoice model_from_header(const std::string& name, const std::vector<std::string>& cols, double tau) {
  if (cols.empty() || cols.front() != "y") throw UsageError("the first CSV column must be 'y'");
  Index p = 0, q = 0;
  for (std::size_t i = 1; i < cols.size(); ++i) {
    const char kind = cols[i].empty() ? '?' : cols[i][0];
    if (kind == 'x' && q == 0)
      ++p;
    else if (kind == 'z')
      ++q;
    else
      throw UsageError("unexpected column '" + cols[i] + "' (expected y, x1.., z1..)");
  }
  if (p == 0) throw UsageError("no regressor columns x1..");
  ModelChoice out;
  out.p = p;
  out.q = q;
  if (name == "ols") {
    if (q) throw UsageError("ols takes columns y, x1..xp only");
    out.model = std::make_unique<moments::OlsMoment>(p);
  } else if (name == "iv") {
    if (q < p) throw UsageError("iv needs at least as many instruments as regressors");
    out.model = std::make_unique<moments::IvMoment>(p, q);
  } else if (name == "sqr") {
    if (q) throw UsageError("sqr takes columns y, x1..xp only");
    out.model = std::make_unique<moments::SmoothedQuantileMoment>(p, tau);
  } else {
    throw UsageError("unknown model '" + name + "' (expected ols, iv or sqr)");
  }
  return out;
}

/// Splits n rows by a batch spec: a single size, or a comma list of sizes
/// that must add up to n. An empty spec is one batch.
std::vector<Index> batch_sizes(const std::string& spec, Index n, Index skip = 0) {
  const Index rows = n - skip;
  if (rows <= 0) throw UsageError("no rows left to process");
  std::vector<Index> sizes;
  if (spec.empty()) return {rows};
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    long v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v <= 0)
      throw UsageError("bad batch size '" + item + "'");
    sizes.push_back(Index(v));
  }
  if (sizes.size() == 1) {
    const Index size = sizes.front();
    sizes.clear();
    for (Index done = 0; done < rows; done += size) sizes.push_back(std::min(size, rows - done));
    return sizes;
  }
  Index total = 0;
  for (Index s : sizes) total += s;
  if (total != rows) throw UsageError("batch sizes add up to " + std::to_string(total) + ", input has " +
                                      std::to_string(rows) + " rows");
  return sizes;
}

struct EstimationOptions {
  std::string model = "ols";
  std::string input = "-";
  std::string method = "ogmm";
  std::string weighting = "welford";
  int lambda = 1;
  double phi = 1.0;
  std::string batches;
  double alpha = 0.05;
  double tau = 0.5;
  std::string out;
  std::string snapshot_out;
};

core::Weighting make_weighting(const EstimationOptions& o, Index q) {
  lrv::KernelLrvConfig cfg;
  cfg.lambda = o.lambda;
  cfg.phi = o.phi;
  switch (core::weighting_mode_from_string(o.weighting)) {
    case core::WeightingMode::Fixed:
      return core::Weighting::identity(q);
    case core::WeightingMode::Welford:
      return core::Weighting::welford(q);
    case core::WeightingMode::KernelLrv:
      return core::Weighting::kernel(q, cfg);
  }
  throw UsageError("unknown weighting");
}

Vector initial_estimate(const std::string& name, const ModelChoice& mc, const core::Batch& d1, double tau) {
  const Matrix& d = d1.obs;
  if (name == "ols") {
    Eigen::ColPivHouseholderQR<Matrix> qr(d.rightCols(mc.p));
    if (qr.rank() < mc.p) throw RankDeficient("first batch: regressors are collinear");
    return qr.solve(Vector(d.col(0)));
  }
  if (name == "iv") return offline::tsls(d1, mc.p, mc.q);
  return offline::initial_quantile_fit(d.col(0), d.rightCols(mc.p), tau);
}

void write_estimate_header(std::ostream& out, Index p) {
  out << "b,N";
  for (Index j = 1; j <= p; ++j) out << ",theta" << j;
  for (Index j = 1; j <= p; ++j) out << ",lower" << j;
  for (Index j = 1; j <= p; ++j) out << ",upper" << j;
  out << '\n';
}

void write_estimate_row(std::ostream& out, const core::OgmmState& st, double alpha) {
  const Index p = st.theta.size();
  std::vector<double> lo(std::size_t(p), std::numeric_limits<double>::quiet_NaN()), hi = lo;
  if (st.weighting.mode() != core::WeightingMode::Fixed && st.weighting.count() >= 2) {
    try {
      const Matrix sigma = st.weighting.variance();
      for (Index j = 0; j < p; ++j) std::tie(lo[j], hi[j]) = inference::marginal_interval(st, sigma, j, alpha);
    } catch (const NumericError&) {
      // intervals stay undefined (e.g. a degenerate variance estimate)
    }
  }
  out << st.b << ',' << st.N;
  for (Index j = 0; j < p; ++j) out << ',' << num(st.theta(j));
  for (Index j = 0; j < p; ++j) out << ',' << num(lo[j]);
  for (Index j = 0; j < p; ++j) out << ',' << num(hi[j]);
  out << '\n';
}

core::OgmmEstimator::Options estimator_options(const std::string& method) {
  core::OgmmEstimator::Options opts;
  if (method == "ogmm-implicit")
    opts.implicit = true;
  else if (method != "ogmm")
    throw UsageError("unknown method '" + method + "' (expected ogmm or ogmm-implicit)");
  return opts;
}

/// Streams the remaining batches through the estimator, printing a row per batch.
void stream_batches(core::OgmmEstimator& est, const Matrix& data, Index start, const std::vector<Index>& sizes,
                    std::ostream& out, double alpha) {
  Index row = start;
  for (Index size : sizes) {
    est.update(core::Batch(data.middleRows(row, size)));
    row += size;
    write_estimate_row(out, est.state(), alpha);
  }
}

void add_estimation_flags(CLI::App* cmd, EstimationOptions& o) {
  cmd->add_option("--input", o.input, "CSV file with a header row (default: stdin)");
  cmd->add_option("--method", o.method, "ogmm or ogmm-implicit")->capture_default_str();
  cmd->add_option("--weighting", o.weighting, "fixed, welford or klrv")
      ->check(CLI::IsMember({"fixed", "welford", "klrv"}))
      ->capture_default_str();
  cmd->add_option("--lambda", o.lambda, "kernel order of the klrv weighting")->check(CLI::PositiveNumber);
  cmd->add_option("--phi", o.phi, "window growth factor of the klrv weighting")->check(CLI::Range(1.0, 1e9));
  cmd->add_option("--batches", o.batches, "batch size, or comma-separated sizes covering every row");
  cmd->add_option("--alpha", o.alpha, "interval level is 1 - alpha")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  cmd->add_option("--tau", o.tau, "quantile level for --model sqr")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  cmd->add_option("--out", o.out, "output CSV (default: stdout)");
  cmd->add_option("--snapshot-out", o.snapshot_out, "write the final estimator state as JSON");
}

int cmd_simulate(int model, double theta2, double tau, long n, std::uint64_t seed, const std::string& out_path) {
  if (n <= 0) throw UsageError("--n must be positive");
  auto gen = simgen::make_generator({model, theta2, tau}, seed);
  const Matrix data = gen->next(Index(n));
  Output out(out_path);
  simgen::write_csv(out.stream(), gen->columns(), data);
  return 0;
}

int cmd_estimate(const EstimationOptions& o) {
  const simgen::CsvTable table = read_input(o.input);
  const ModelChoice mc = model_from_header(o.model, table.columns, o.tau);
  const std::vector<Index> sizes = batch_sizes(o.batches, table.data.rows());
  core::OgmmEstimator est(*mc.model, estimator_options(o.method));
  const core::Batch d1(table.data.topRows(sizes.front()));
  est.init(d1, initial_estimate(o.model, mc, d1, o.tau), make_weighting(o, mc.model->num_moments()));

  Output out(o.out);
  write_estimate_header(out.stream(), mc.p);
  write_estimate_row(out.stream(), est.state(), o.alpha);
  stream_batches(est, table.data, sizes.front(), std::vector<Index>(sizes.begin() + 1, sizes.end()), out.stream(),
                 o.alpha);
  if (!o.snapshot_out.empty()) core::save_snapshot(o.snapshot_out, est.state(), o.model);
  return 0;
}

int cmd_replay(const EstimationOptions& o, const std::string& snapshot) {
  std::string recorded;
  core::OgmmState state = core::load_snapshot(snapshot, &recorded);
  const simgen::CsvTable table = read_input(o.input);
  const ModelChoice mc = model_from_header(recorded.empty() ? o.model : recorded, table.columns, o.tau);
  if (mc.model->num_params() != state.theta.size() || mc.model->num_moments() != state.Uprime.size())
    throw UsageError("snapshot dimensions do not match the input columns");
  core::OgmmEstimator est(*mc.model, estimator_options(o.method));
  est.set_state(std::move(state));

  Output out(o.out);
  write_estimate_header(out.stream(), mc.p);
  stream_batches(est, table.data, 0, batch_sizes(o.batches, table.data.rows()), out.stream(), o.alpha);
  if (!o.snapshot_out.empty()) core::save_snapshot(o.snapshot_out, est.state(), mc.model->name());
  return 0;
}

struct TestOptions {
  EstimationOptions est;
  long reference = 0;
  bool cumulative = false;
};

int cmd_test(const TestOptions& t) {
  const EstimationOptions& o = t.est;
  if (o.weighting == "fixed") throw UsageError("the stability tests need --weighting welford or klrv");
  const simgen::CsvTable table = read_input(o.input);
  const ModelChoice mc = model_from_header(o.model, table.columns, o.tau);
  if (t.reference <= 0 || t.reference >= table.data.rows())
    throw UsageError("--reference must be positive and leave rows to test");
  const std::vector<Index> sizes = batch_sizes(o.batches, table.data.rows(), Index(t.reference));
  const core::MomentModel& model = *mc.model;
  const std::vector<double> alphas{o.alpha};

  const core::Batch d1(table.data.topRows(Index(t.reference)));
  Vector theta1 = initial_estimate(o.model, mc, d1, o.tau);
  if (o.model == "iv" && mc.q > mc.p) {
    offline::TwoStepOptions two_step;
    two_step.theta_start = theta1;
    theta1 = offline::twostep_gmm(model, d1, two_step).theta;
  }
  core::OgmmState ref = core::init_state(model, d1, theta1, make_weighting(o, model.num_moments()));

  Output out(o.out);
  std::ostream& os = out.stream();
  os << "b,N,n_b,tf,tf_df,tf_p,tf_reject,tu,tu_df,tu_p,tu_reject,accepted\n";
  Index row = Index(t.reference);
  std::size_t b = 1;
  for (Index size : sizes) {
    const core::Batch db(table.data.middleRows(row, size));
    row += size;
    ++b;
    const auto [tf, updated] = inference::anomaly_tf_update(ref, model, db, alphas);
    const auto tu = inference::anomaly_tu(inference::AnomalySnapshot::from_state(ref), model, db, {}, alphas);
    const bool accepted = !tf.rejects(o.alpha) && !tu.rejects(o.alpha);
    os << b << ',' << row << ',' << size << ',' << num(tf.statistic) << ',' << tf.df << ',' << num(tf.p_value) << ','
       << int(tf.rejects(o.alpha)) << ',' << num(tu.statistic) << ',' << tu.df << ',' << num(tu.p_value) << ','
       << int(tu.rejects(o.alpha)) << ',' << int(accepted) << '\n';
    if (t.cumulative && accepted) ref = core::update_batch(std::move(ref), model, db);
  }
  if (model.num_moments() > model.num_params()) {
    const auto sh = inference::sargan_hansen(ref, ref.weighting.variance(), alphas);
    os << "# reference sargan_hansen statistic=" << num(sh.statistic) << " df=" << sh.df
       << " p_value=" << num(sh.p_value) << " N=" << ref.N << '\n';
  }
  return 0;
}

int cmd_bench(const std::string& config_path, int reps, long long seed, int threads, const std::string& out_path) {
  harness::ExperimentConfig cfg = harness::load_config(config_path);
  if (reps > 0) cfg.reps = reps;
  if (seed >= 0) cfg.seed = std::uint64_t(seed);
  if (threads >= 0) cfg.threads = threads;
  if (!out_path.empty()) cfg.out = out_path;
  const harness::ExperimentResult result = harness::run_experiment(cfg);
  if (cfg.out.empty()) {
    harness::write_metrics_csv(std::cout, result.rows);
  } else {
    harness::write_result(cfg.out, cfg, result);
    std::cout << "wrote " << cfg.out << ".csv and " << cfg.out << ".json (" << result.failures.size()
              << " failed method runs)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online generalized method of moments toolkit"};
  app.require_subcommand(1);

  int sim_model = 1;
  double sim_theta2 = 0.0, sim_tau = 0.1;
  long sim_n = 1000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "write simulated observations as CSV");
  simulate->add_option("--model", sim_model, "simulation design 1..8")->required()->check(CLI::Range(1, 8));
  simulate->add_option("--theta2", sim_theta2, "z1 coefficient (3, 4) or anomaly size (7, 8)");
  simulate->add_option("--tau", sim_tau, "quantile level (5, 6)");
  simulate->add_option("--n", sim_n, "number of rows")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "output CSV (default: stdout)");

  EstimationOptions est_opts;
  auto* estimate = app.add_subcommand("estimate", "run OGMM over a CSV stream and print estimates per batch");
  estimate->add_option("--model", est_opts.model, "ols, iv or sqr")->required();
  add_estimation_flags(estimate, est_opts);

  TestOptions test_opts;
  auto* test = app.add_subcommand("test", "stability tests of each batch against a reference sample");
  test->add_option("--model", test_opts.est.model, "ols, iv or sqr")->required();
  test->add_option("--reference", test_opts.reference, "rows forming the reference sample")->required();
  test->add_flag("--cumulative", test_opts.cumulative, "fold batches that pass both tests into the reference");
  add_estimation_flags(test, test_opts.est);

  std::string bench_config, bench_out;
  int bench_reps = 0, bench_threads = -1;
  long long bench_seed = -1;
  auto* bench = app.add_subcommand("bench", "run a JSON experiment configuration");
  bench->add_option("config", bench_config, "experiment configuration (JSON)")->required();
  bench->add_option("--reps", bench_reps, "override the replication count")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "override the base seed")->check(CLI::NonNegativeNumber);
  bench->add_option("--threads", bench_threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  bench->add_option("--out", bench_out, "output prefix for <out>.csv and <out>.json");

  EstimationOptions replay_opts;
  std::string replay_snapshot;
  auto* replay = app.add_subcommand("replay", "resume from a saved estimator state");
  replay->add_option("--snapshot", replay_snapshot, "state written by --snapshot-out")->required();
  replay->add_option("--model", replay_opts.model, "model when the snapshot does not record one");
  add_estimation_flags(replay, replay_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_model, sim_theta2, sim_tau, sim_n, sim_seed, sim_out);
    if (*estimate) return cmd_estimate(est_opts);
    if (*test) return cmd_test(test_opts);
    if (*bench) return cmd_bench(bench_config, bench_reps, bench_seed, bench_threads, bench_out);
    if (*replay) return cmd_replay(replay_opts, replay_snapshot);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}
