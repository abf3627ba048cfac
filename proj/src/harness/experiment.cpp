#include "ogmm/harness/experiment.hpp"

#include "ogmm/core/estimator.hpp"
#include "ogmm/errors.hpp"
#include "ogmm/inference/distributions.hpp"
#include "ogmm/inference/inference.hpp"
#include "ogmm/moments/linear.hpp"
#include "ogmm/moments/quantile.hpp"
#include "ogmm/sgmm/sgmm.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

namespace ogmm::harness {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_quantile_model(int model) { return model == 5 || model == 6; }

const char* lrv_name(offline::LrvChoice c) {
  switch (c) {
    case offline::LrvChoice::SampleCovariance:
      return "sample";
    case offline::LrvChoice::Bartlett:
      return "bartlett";
    case offline::LrvChoice::Kernel:
      return "kernel";
  }
  return "?";
}

offline::LrvChoice lrv_from_string(const std::string& s) {
  if (s == "sample") return offline::LrvChoice::SampleCovariance;
  if (s == "bartlett") return offline::LrvChoice::Bartlett;
  if (s == "kernel") return offline::LrvChoice::Kernel;
  throw FormatError("unknown long-run variance choice '" + s + "' (expected sample, bartlett or kernel)");
}

const char* init_name(InitKind k) {
  switch (k) {
    case InitKind::Auto:
      return "auto";
    case InitKind::TwoStep:
      return "twostep";
    case InitKind::Tsls:
      return "tsls";
    case InitKind::Quantile:
      return "quantile";
  }
  return "?";
}

InitKind init_from_string(const std::string& s) {
  for (InitKind k : {InitKind::Auto, InitKind::TwoStep, InitKind::Tsls, InitKind::Quantile})
    if (s == init_name(k)) return k;
  throw FormatError("unknown initializer '" + s + "'");
}

/// Rejects keys outside `allowed` so that misspelled options do not pass silently.
void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw FormatError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string default_label(const MethodSpec& m) {
  const std::string w = core::to_string(m.weighting);
  switch (m.kind) {
    case MethodKind::Ogmm:
      return std::string("ogmm-") + (m.implicit ? "implicit-" : "") + w;
    case MethodKind::Sgmm: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", m.kappa);
      return std::string("sgmm-") + (m.sgmm_klrv ? "klrv-" : "") + "k" + buf;
    }
    case MethodKind::Gmm:
      return std::string("gmm-") + lrv_name(m.gmm_lrv);
    case MethodKind::Tsls:
      return "tsls";
    case MethodKind::Leqr:
      return "leqr";
    case MethodKind::AnomalyTf:
      return "tf-" + w;
    case MethodKind::AnomalyTu:
      return "tu-" + w;
  }
  return "?";
}

core::Weighting make_weighting(const MethodSpec& m, Index q) {
  switch (m.weighting) {
    case core::WeightingMode::Fixed:
      return core::Weighting::identity(q);
    case core::WeightingMode::Welford:
      return core::Weighting::welford(q);
    case core::WeightingMode::KernelLrv:
      return core::Weighting::kernel(q, m.klrv);
  }
  throw DomainError("unknown weighting mode");
}

// ---------------------------------------------------------------------------
// Replication bookkeeping

struct Cell {
  Vector theta;  // empty for test-only methods
  double covered = kNaN;
  double rejected = kNaN;
  double time_s = 0.0;
};

struct MethodRun {
  bool ok = false;
  std::vector<Cell> cells;  // one per checkpoint after the first
  std::string error;
};

struct RepOutcome {
  std::vector<MethodRun> runs;
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

struct RepContext {
  const ExperimentConfig& cfg;
  const core::MomentModel& model;
  const Matrix& data;
  const Vector& theta1;
  const Vector& truth;
  const Vector& contrast;

  Index p() const { return model.num_params(); }
  Index q() const { return model.num_moments(); }
  std::size_t checkpoints() const { return cfg.checkpoints.size(); }
  core::Batch batch(std::size_t c) const {
    const std::size_t lo = c == 0 ? 0 : cfg.checkpoints[c - 1];
    return core::Batch(data.middleRows(Index(lo), Index(cfg.checkpoints[c] - lo)));
  }
  core::Batch prefix(std::size_t c) const { return core::Batch(data.topRows(Index(cfg.checkpoints[c]))); }
  double alpha() const { return cfg.alphas.front(); }
  bool overidentified() const { return q() > p(); }
  double covers(const std::pair<double, double>& ci) const {
    const double target = contrast.dot(truth);
    return (target >= ci.first && target <= ci.second) ? 1.0 : 0.0;
  }
};

std::vector<Cell> run_ogmm(const RepContext& ctx, const MethodSpec& m) {
  core::OgmmEstimator::Options opts;
  opts.implicit = m.implicit;
  core::OgmmEstimator est(ctx.model, opts);
  est.init(ctx.batch(0), ctx.theta1, make_weighting(m, ctx.q()));
  std::vector<Cell> cells;
  for (std::size_t c = 1; c < ctx.checkpoints(); ++c) {
    const core::Batch db = ctx.batch(c);
    Cell cell;
    const Stopwatch sw;
    est.update(db);
    cell.time_s = sw.seconds();
    const auto& st = est.state();
    cell.theta = st.theta;
    if (m.weighting != core::WeightingMode::Fixed) {
      const Matrix sigma = st.weighting.variance();
      cell.covered = ctx.covers(inference::linear_interval(st, sigma, ctx.contrast, ctx.cfg.ci_alpha));
      if (ctx.overidentified())
        cell.rejected = inference::sargan_hansen(st, sigma, ctx.cfg.alphas).rejects(ctx.alpha()) ? 1.0 : 0.0;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<Cell> run_sgmm(const RepContext& ctx, const MethodSpec& m) {
  sgmm::SgmmConfig cfg;
  cfg.a = m.a;
  cfg.kappa = m.kappa;
  cfg.use_klrv = m.sgmm_klrv;
  cfg.klrv = m.klrv;
  const core::Batch d1 = ctx.batch(0);
  sgmm::Sgmm sg(ctx.model, d1, ctx.theta1, cfg);
  sg.push(d1);
  if (m.sgmm_klrv) sg.refresh_weighting();
  std::vector<Cell> cells;
  for (std::size_t c = 1; c < ctx.checkpoints(); ++c) {
    const core::Batch db = ctx.batch(c);
    Cell cell;
    const Stopwatch sw;
    sg.push(db);
    if (m.sgmm_klrv) sg.refresh_weighting();
    cell.time_s = sw.seconds();
    cell.theta = sg.theta_bar();
    cell.covered = ctx.covers(sg.linear_interval(ctx.contrast, ctx.cfg.ci_alpha));
    if (ctx.overidentified()) cell.rejected = sg.overident(ctx.cfg.alphas).rejects(ctx.alpha()) ? 1.0 : 0.0;
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<Cell> run_gmm(const RepContext& ctx, const MethodSpec& m) {
  offline::TwoStepOptions opts;
  opts.lrv = m.gmm_lrv;
  opts.klrv = m.klrv;
  Vector previous = ctx.theta1;
  std::vector<Cell> cells;
  for (std::size_t c = 1; c < ctx.checkpoints(); ++c) {
    const core::Batch all = ctx.prefix(c);
    opts.theta_start = previous;
    Cell cell;
    const Stopwatch sw;
    const offline::TwoStepResult res = offline::twostep_gmm(ctx.model, all, opts);
    cell.time_s = sw.seconds();
    previous = res.theta;
    cell.theta = res.theta;

    const double n = double(all.size());
    const core::Batch prepared = ctx.model.prepare(all, 0);
    const Matrix v = ctx.model.evaluate(res.theta, prepared, false).grad_sum / n;
    const Matrix cov = inference::efficient_covariance(v, res.sigma);
    const double half = inference::normal_quantile(1.0 - ctx.cfg.ci_alpha / 2.0) *
                        std::sqrt(ctx.contrast.dot(cov * ctx.contrast) / n);
    const double center = ctx.contrast.dot(res.theta);
    cell.covered = ctx.covers({center - half, center + half});
    if (ctx.overidentified())
      cell.rejected =
          res.j_statistic > inference::chisq_quantile(1.0 - ctx.alpha(), double(ctx.q() - ctx.p())) ? 1.0 : 0.0;
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<Cell> run_tsls(const RepContext& ctx) {
  std::vector<Cell> cells;
  for (std::size_t c = 1; c < ctx.checkpoints(); ++c) {
    const core::Batch all = ctx.prefix(c);
    Cell cell;
    const Stopwatch sw;
    cell.theta = offline::tsls(all, ctx.p(), ctx.q());
    cell.time_s = sw.seconds();
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<Cell> run_leqr(const RepContext& ctx) {
  const auto* sqr = dynamic_cast<const moments::SmoothedQuantileMoment*>(&ctx.model);
  if (!sqr) throw DomainError("leqr needs the quantile moments");
  moments::Leqr leqr(ctx.p(), {sqr->tau(), 2000.0}, ctx.theta1, ctx.cfg.checkpoints.front());
  leqr.push(ctx.batch(0).obs);
  std::vector<Cell> cells;
  for (std::size_t c = 1; c < ctx.checkpoints(); ++c) {
    const core::Batch db = ctx.batch(c);
    Cell cell;
    const Stopwatch sw;
    leqr.push(db.obs);
    cell.time_s = sw.seconds();
    cell.theta = leqr.estimate();
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<Cell> run_anomaly(const RepContext& ctx, const MethodSpec& m) {
  const core::OgmmState ref = core::init_state(ctx.model, ctx.batch(0), ctx.theta1, make_weighting(m, ctx.q()));
  const auto snap = inference::AnomalySnapshot::from_state(ref);
  std::vector<Cell> cells;
  for (std::size_t c = 1; c < ctx.checkpoints(); ++c) {
    const core::Batch db = ctx.batch(c);
    Cell cell;
    const Stopwatch sw;
    const inference::TestReport rep = m.kind == MethodKind::AnomalyTf
                                          ? inference::anomaly_tf_update(ref, ctx.model, db, ctx.cfg.alphas).first
                                          : inference::anomaly_tu(snap, ctx.model, db, {}, ctx.cfg.alphas);
    cell.time_s = sw.seconds();
    cell.rejected = rep.rejects(ctx.alpha()) ? 1.0 : 0.0;
    cells.push_back(std::move(cell));
  }
  return cells;
}

Vector initial_estimate(const ExperimentConfig& cfg, const core::MomentModel& model, const core::Batch& d1) {
  InitKind kind = cfg.init;
  if (kind == InitKind::Auto) kind = is_quantile_model(cfg.sim.model) ? InitKind::Quantile : InitKind::TwoStep;
  switch (kind) {
    case InitKind::Quantile: {
      const auto* sqr = dynamic_cast<const moments::SmoothedQuantileMoment*>(&model);
      if (!sqr) throw DomainError("quantile initializer needs the quantile moments");
      return offline::initial_quantile_fit(d1.obs.col(0), d1.obs.rightCols(model.num_params()), sqr->tau());
    }
    case InitKind::Tsls:
      return offline::tsls(d1, model.num_params(), model.num_moments());
    case InitKind::TwoStep:
    case InitKind::Auto: {
      offline::TwoStepOptions opts;
      opts.lrv = cfg.init_lrv;
      return offline::twostep_gmm(model, d1, opts).theta;
    }
  }
  throw DomainError("unknown initializer");
}

RepOutcome run_replication(const ExperimentConfig& cfg, int rep) {
  RepOutcome out;
  out.runs.resize(cfg.methods.size());
  auto fail_all = [&](const std::string& what) {
    for (auto& r : out.runs) {
      r.ok = false;
      r.error = what;
    }
  };
  try {
    const auto model = moment_model_for(cfg.sim);
    auto gen = simgen::make_generator(cfg.sim, cfg.seed + std::uint64_t(rep));
    const Matrix data = gen->next(Index(cfg.checkpoints.back()));
    const Vector truth = gen->theta_star();
    Vector contrast = cfg.contrast ? *cfg.contrast : Vector(Vector::Unit(model->num_params(), 0));
    const Vector theta1 = initial_estimate(cfg, *model, core::Batch(data.topRows(Index(cfg.checkpoints.front()))));
    const RepContext ctx{cfg, *model, data, theta1, truth, contrast};
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
      const MethodSpec& m = cfg.methods[i];
      try {
        switch (m.kind) {
          case MethodKind::Ogmm:
            out.runs[i].cells = run_ogmm(ctx, m);
            break;
          case MethodKind::Sgmm:
            out.runs[i].cells = run_sgmm(ctx, m);
            break;
          case MethodKind::Gmm:
            out.runs[i].cells = run_gmm(ctx, m);
            break;
          case MethodKind::Tsls:
            out.runs[i].cells = run_tsls(ctx);
            break;
          case MethodKind::Leqr:
            out.runs[i].cells = run_leqr(ctx);
            break;
          case MethodKind::AnomalyTf:
          case MethodKind::AnomalyTu:
            out.runs[i].cells = run_anomaly(ctx, m);
            break;
        }
        out.runs[i].ok = true;
      } catch (const std::exception& e) {
        out.runs[i].ok = false;
        out.runs[i].error = e.what();
      }
    }
  } catch (const std::exception& e) {
    fail_all(std::string("replication setup: ") + e.what());
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Mean of the finite entries; NaN when there are none.
double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  int n = 0;
  for (double x : v)
    if (std::isfinite(x)) sum += x, ++n;
  return n ? sum / n : kNaN;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Ogmm:
      return "ogmm";
    case MethodKind::Sgmm:
      return "sgmm";
    case MethodKind::Gmm:
      return "gmm";
    case MethodKind::Tsls:
      return "tsls";
    case MethodKind::Leqr:
      return "leqr";
    case MethodKind::AnomalyTf:
      return "tf";
    case MethodKind::AnomalyTu:
      return "tu";
  }
  return "?";
}

MethodKind method_kind_from_string(const std::string& name) {
  for (MethodKind k : {MethodKind::Ogmm, MethodKind::Sgmm, MethodKind::Gmm, MethodKind::Tsls, MethodKind::Leqr,
                       MethodKind::AnomalyTf, MethodKind::AnomalyTu})
    if (name == to_string(k)) return k;
  throw FormatError("unknown method '" + name + "'");
}

std::unique_ptr<core::MomentModel> moment_model_for(const simgen::SimSpec& sim) {
  switch (sim.model) {
    case 1:
      return std::make_unique<moments::IvMoment>(5, 20);
    case 2:
      return std::make_unique<moments::IvMoment>(2, 4);
    case 3:
    case 4:
    case 7:
    case 8:
      return std::make_unique<moments::IvMoment>(1, 2);
    case 5:
    case 6:
      return std::make_unique<moments::SmoothedQuantileMoment>(10, sim.tau);
    default:
      throw DomainError("unknown simulation model " + std::to_string(sim.model));
  }
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw FormatError("unsupported schema_version " + std::to_string(schema_version));
  if (sim.model < 1 || sim.model > 8) throw FormatError("model must be between 1 and 8");
  if (reps < 1) throw FormatError("reps must be at least 1");
  if (methods.empty()) throw FormatError("at least one method is required");
  if (checkpoints.size() < 2) throw FormatError("at least two checkpoints are required");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1]) throw FormatError("checkpoints must be strictly increasing");
  if (checkpoints.front() < 2) throw FormatError("the first batch needs at least two observations");
  if (alphas.empty()) throw FormatError("at least one test level is required");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw FormatError("test levels must lie in (0,1)");
  if (!(ci_alpha > 0.0 && ci_alpha < 1.0)) throw FormatError("ci_alpha must lie in (0,1)");
  if (threads < 0) throw FormatError("threads must be non-negative");

  const auto model = moment_model_for(sim);
  if (contrast && contrast->size() != model->num_params())
    throw FormatError("contrast must have one entry per parameter");
  const bool quantile = is_quantile_model(sim.model);
  std::set<std::string> labels;
  for (const MethodSpec& m : methods) {
    const std::string label = m.label.empty() ? default_label(m) : m.label;
    if (!labels.insert(label).second) throw FormatError("duplicate method label '" + label + "'");
    if (m.kind == MethodKind::Leqr && !quantile) throw FormatError("leqr applies to the quantile models (5, 6)");
    if ((m.kind == MethodKind::Tsls || m.kind == MethodKind::AnomalyTf || m.kind == MethodKind::AnomalyTu) && quantile)
      throw FormatError(std::string(to_string(m.kind)) + " needs an instrumental-variable model");
    if ((m.kind == MethodKind::AnomalyTf || m.kind == MethodKind::AnomalyTu) &&
        m.weighting == core::WeightingMode::Fixed)
      throw FormatError("anomaly statistics need an estimated (welford or klrv) reference variance");
    m.klrv.validate();
  }
}

ExperimentConfig config_from_json(const json& doc) {
  check_keys(doc,
             {"schema_version", "model", "methods", "checkpoints", "batch_size", "batches", "reps", "seed", "alphas",
              "ci_alpha", "contrast", "init", "init_lrv", "threads", "out"},
             "config");
  ExperimentConfig cfg;
  cfg.schema_version = get_or<int>(doc, "schema_version", -1);
  if (!doc.contains("model")) throw FormatError("config: 'model' is required");
  const json& model = doc.at("model");
  check_keys(model, {"id", "theta2", "tau"}, "model");
  cfg.sim.model = get_or<int>(model, "id", 0);
  cfg.sim.theta2 = get_or<double>(model, "theta2", 0.0);
  cfg.sim.tau = get_or<double>(model, "tau", 0.1);

  if (!doc.contains("methods") || !doc.at("methods").is_array()) throw FormatError("config: 'methods' must be a list");
  for (const json& mj : doc.at("methods")) {
    check_keys(mj, {"kind", "label", "implicit", "weighting", "lambda", "phi", "kappa", "a", "klrv", "lrv"}, "method");
    MethodSpec m;
    m.kind = method_kind_from_string(get_or<std::string>(mj, "kind", ""));
    m.label = get_or<std::string>(mj, "label", "");
    m.implicit = get_or<bool>(mj, "implicit", false);
    const std::string default_weighting =
        (m.kind == MethodKind::AnomalyTf || m.kind == MethodKind::AnomalyTu) ? "welford" : "klrv";
    try {
      m.weighting = core::weighting_mode_from_string(get_or<std::string>(mj, "weighting", default_weighting));
    } catch (const Error& e) {
      throw FormatError(e.what());
    }
    m.klrv.lambda = get_or<int>(mj, "lambda", 1);
    m.klrv.phi = get_or<double>(mj, "phi", 1.0);
    m.kappa = get_or<double>(mj, "kappa", 0.5);
    m.a = get_or<double>(mj, "a", 0.501);
    m.sgmm_klrv = get_or<bool>(mj, "klrv", false);
    m.gmm_lrv = lrv_from_string(get_or<std::string>(mj, "lrv", "bartlett"));
    cfg.methods.push_back(m);
  }

  if (doc.contains("checkpoints")) {
    if (doc.contains("batch_size") || doc.contains("batches"))
      throw FormatError("config: give either 'checkpoints' or 'batch_size' with 'batches'");
    cfg.checkpoints = get_or<std::vector<std::size_t>>(doc, "checkpoints", {});
  } else {
    const auto size = get_or<std::size_t>(doc, "batch_size", 0);
    const auto count = get_or<std::size_t>(doc, "batches", 0);
    if (size == 0 || count == 0) throw FormatError("config: 'checkpoints' or positive 'batch_size' and 'batches'");
    for (std::size_t b = 1; b <= count; ++b) cfg.checkpoints.push_back(size * b);
  }
  cfg.reps = get_or<int>(doc, "reps", 1);
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 1);
  cfg.alphas = get_or<std::vector<double>>(doc, "alphas", {0.05});
  cfg.ci_alpha = get_or<double>(doc, "ci_alpha", 0.05);
  if (doc.contains("contrast")) {
    const auto c = get_or<std::vector<double>>(doc, "contrast", {});
    cfg.contrast = Eigen::Map<const Vector>(c.data(), Index(c.size()));
  }
  cfg.init = init_from_string(get_or<std::string>(doc, "init", "auto"));
  cfg.init_lrv = lrv_from_string(get_or<std::string>(doc, "init_lrv", "bartlett"));
  cfg.threads = get_or<int>(doc, "threads", 0);
  cfg.out = get_or<std::string>(doc, "out", "");
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (const MethodSpec& m : cfg.methods) {
    json mj = {{"kind", to_string(m.kind)}, {"label", m.label.empty() ? default_label(m) : m.label}};
    switch (m.kind) {
      case MethodKind::Ogmm:
        mj["implicit"] = m.implicit;
        [[fallthrough]];
      case MethodKind::AnomalyTf:
      case MethodKind::AnomalyTu:
        mj["weighting"] = core::to_string(m.weighting);
        mj["lambda"] = m.klrv.lambda;
        mj["phi"] = m.klrv.phi;
        break;
      case MethodKind::Sgmm:
        mj["kappa"] = m.kappa;
        mj["a"] = m.a;
        mj["klrv"] = m.sgmm_klrv;
        mj["lambda"] = m.klrv.lambda;
        mj["phi"] = m.klrv.phi;
        break;
      case MethodKind::Gmm:
        mj["lrv"] = lrv_name(m.gmm_lrv);
        break;
      case MethodKind::Tsls:
      case MethodKind::Leqr:
        break;
    }
    methods.push_back(mj);
  }
  json doc = {{"schema_version", cfg.schema_version},
              {"model", {{"id", cfg.sim.model}, {"theta2", cfg.sim.theta2}, {"tau", cfg.sim.tau}}},
              {"methods", methods},
              {"checkpoints", cfg.checkpoints},
              {"reps", cfg.reps},
              {"seed", cfg.seed},
              {"alphas", cfg.alphas},
              {"ci_alpha", cfg.ci_alpha},
              {"init", init_name(cfg.init)},
              {"init_lrv", lrv_name(cfg.init_lrv)},
              {"threads", cfg.threads},
              {"out", cfg.out}};
  if (cfg.contrast) doc["contrast"] = std::vector<double>(cfg.contrast->data(), cfg.contrast->data() + cfg.contrast->size());
  return doc;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config '" + path + "': " + e.what());
  }
  return config_from_json(doc);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
  unsigned workers = cfg.threads > 0 ? unsigned(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, unsigned(cfg.reps));

  std::atomic<int> next{0};
  auto work = [&] {
    for (int rep = next++; rep < cfg.reps; rep = next++) outcomes[std::size_t(rep)] = run_replication(cfg, rep);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // Deterministic fold in replication order.
  ExperimentResult result;
  const Vector truth = simgen::make_generator(cfg.sim, cfg.seed)->theta_star();
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const MethodSpec& m = cfg.methods[i];
    const std::string label = m.label.empty() ? default_label(m) : m.label;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      const MethodRun& run = outcomes[std::size_t(rep)].runs[i];
      if (!run.ok) result.failures.push_back({label, rep, cfg.seed + std::uint64_t(rep), run.error});
    }
    for (std::size_t c = 1; c < cfg.checkpoints.size(); ++c) {
      MetricsRow row;
      row.method = label;
      row.b = c + 1;
      row.N = cfg.checkpoints[c];
      std::vector<double> sq, abs_err, covered, rejected, times;
      for (int rep = 0; rep < cfg.reps; ++rep) {
        const MethodRun& run = outcomes[std::size_t(rep)].runs[i];
        if (!run.ok) {
          ++row.failures;
          continue;
        }
        ++row.reps;
        const Cell& cell = run.cells[c - 1];
        if (cell.theta.size() == truth.size()) {
          sq.push_back((cell.theta - truth).squaredNorm());
          abs_err.push_back((cell.theta - truth).cwiseAbs().mean());
        }
        covered.push_back(cell.covered);
        rejected.push_back(cell.rejected);
        times.push_back(cell.time_s);
      }
      row.mse = mean_of(sq);
      row.mae = median_of(abs_err);
      row.coverage = mean_of(covered);
      row.rejection_rate = mean_of(rejected);
      row.mean_time_s = mean_of(times);
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "method,b,N,reps,failures,mse,mae,coverage,rejection_rate,mean_time_s\n";
  for (const MetricsRow& r : rows)
    out << r.method << ',' << r.b << ',' << r.N << ',' << r.reps << ',' << r.failures << ',' << format_double(r.mse)
        << ',' << format_double(r.mae) << ',' << format_double(r.coverage) << ',' << format_double(r.rejection_rate)
        << ',' << format_double(r.mean_time_s) << '\n';
}

json result_sidecar(const ExperimentConfig& cfg, const ExperimentResult& result) {
  json failures = json::array();
  for (const FailureRecord& f : result.failures)
    failures.push_back({{"method", f.method}, {"rep", f.rep}, {"seed", f.seed}, {"error", f.error}});
  return {{"schema_version", kConfigSchemaVersion},
          {"config", config_to_json(cfg)},
          {"columns", {"method", "b", "N", "reps", "failures", "mse", "mae", "coverage", "rejection_rate",
                       "mean_time_s"}},
          {"failures", failures},
          {"environment",
           {{"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"hardware_threads", std::thread::hardware_concurrency()}}}};
}

void write_result(const std::string& prefix, const ExperimentConfig& cfg, const ExperimentResult& result) {
  std::ofstream csv(prefix + ".csv");
  if (!csv) throw FormatError("cannot write '" + prefix + ".csv'");
  write_metrics_csv(csv, result.rows);
  std::ofstream side(prefix + ".json");
  if (!side) throw FormatError("cannot write '" + prefix + ".json'");
  side << result_sidecar(cfg, result).dump(2) << '\n';
}

}  // namespace ogmm::harness
