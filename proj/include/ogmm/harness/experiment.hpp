#pragma once

#include "ogmm/core/moment_model.hpp"
#include "ogmm/core/weighting.hpp"
#include "ogmm/lrv/kernel_lrv.hpp"
#include "ogmm/offline/offline.hpp"
#include "ogmm/simgen/models.hpp"
#include "ogmm/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ogmm::harness {

inline constexpr int kConfigSchemaVersion = 1;

enum class MethodKind {
  Ogmm,      // online GMM, explicit or implicit
  Sgmm,      // stochastic GMM
  Gmm,       // offline two-step GMM on all data so far, warm-started
  Tsls,      // offline two-stage least squares on all data so far
  Leqr,      // interval-scheduled quantile baseline
  AnomalyTf, // full-sample anomaly statistic against the first batch
  AnomalyTu, // unrestricted stability statistic against the first batch
};

const char* to_string(MethodKind kind);
MethodKind method_kind_from_string(const std::string& name);

struct MethodSpec {
  MethodKind kind = MethodKind::Ogmm;
  /// Name used in the output; defaults to a description of the settings.
  std::string label;

  // OGMM and the anomaly reference
  bool implicit = false;
  core::WeightingMode weighting = core::WeightingMode::KernelLrv;
  lrv::KernelLrvConfig klrv{};

  // SGMM
  double kappa = 0.5;
  double a = 0.501;
  bool sgmm_klrv = false;

  // offline GMM
  offline::LrvChoice gmm_lrv = offline::LrvChoice::Bartlett;
};

enum class InitKind { Auto, TwoStep, Tsls, Quantile };

/// One simulation study. Observations are split at the checkpoints
/// N_1 < N_2 < ...; the first batch (N_1 rows) produces the initial
/// estimate shared by all online methods and metrics are recorded at
/// every later checkpoint.
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  simgen::SimSpec sim{};
  std::vector<MethodSpec> methods;
  std::vector<std::size_t> checkpoints;
  int reps = 1;
  std::uint64_t seed = 1;
  /// Test levels; the first one drives rejection_rate.
  std::vector<double> alphas{0.05};
  /// Confidence level of intervals is 1 - ci_alpha.
  double ci_alpha = 0.05;
  /// Coverage is evaluated for contrast^T theta*; defaults to the first coordinate.
  std::optional<Vector> contrast;
  InitKind init = InitKind::Auto;
  offline::LrvChoice init_lrv = offline::LrvChoice::Bartlett;
  /// Worker threads; 0 means hardware concurrency.
  int threads = 0;
  /// Output prefix: writes <out>.csv and <out>.json.
  std::string out;

  /// Throws FormatError when the configuration is unusable.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

/// Aggregate over replications for one method at one checkpoint. Statistics
/// a method does not produce are NaN.
struct MetricsRow {
  std::string method;
  std::size_t b = 0;
  std::size_t N = 0;
  int reps = 0;      // successful replications
  int failures = 0;
  double mse = 0.0;  // mean over reps of ||theta_hat - theta*||^2
  double mae = 0.0;  // median over reps of mean_j |theta_hat_j - theta*_j|
  double coverage = 0.0;
  double rejection_rate = 0.0;
  double mean_time_s = 0.0;  // mean wall time of the update at this checkpoint
};

struct FailureRecord {
  std::string method;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string error;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::vector<FailureRecord> failures;
};

/// Moment model matching a simulation design.
std::unique_ptr<core::MomentModel> moment_model_for(const simgen::SimSpec& sim);

/// Runs every replication (seed = cfg.seed + rep) on a worker pool and
/// folds the results in replication order, so the aggregate does not
/// depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Stable-order CSV of the metrics rows.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
/// Sidecar with the configuration echo, failures and build information.
nlohmann::json result_sidecar(const ExperimentConfig& cfg, const ExperimentResult& result);
/// Writes <prefix>.csv and <prefix>.json.
void write_result(const std::string& prefix, const ExperimentConfig& cfg, const ExperimentResult& result);

}  // namespace ogmm::harness
