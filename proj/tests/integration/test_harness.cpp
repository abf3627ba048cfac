#include <doctest.h>

#include "ogmm/errors.hpp"
#include "ogmm/harness/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace ogmm;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "schema_version": 1,
    "model": {"id": 3, "theta2": 0.0},
    "methods": [
      {"kind": "ogmm", "weighting": "welford"},
      {"kind": "ogmm", "weighting": "klrv", "implicit": true},
      {"kind": "sgmm"},
      {"kind": "gmm", "lrv": "sample"},
      {"kind": "tsls"},
      {"kind": "tf"},
      {"kind": "tu"}
    ],
    "batch_size": 250,
    "batches": 5,
    "reps": 6,
    "seed": 42
  })");
}

/// CSV without the timing column, which is the only field allowed to vary.
std::string csv_without_time(const std::vector<harness::MetricsRow>& rows) {
  std::ostringstream os;
  harness::write_metrics_csv(os, rows);
  std::istringstream is(os.str());
  std::string line, out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

void check_format_error(json doc, const std::string& fragment) {
  CAPTURE(doc.dump());
  try {
    harness::config_from_json(doc);
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("configuration round-trips through JSON") {
  const harness::ExperimentConfig cfg = harness::config_from_json(base_config());
  CHECK(cfg.checkpoints == std::vector<std::size_t>{250, 500, 750, 1000, 1250});
  CHECK(cfg.methods.size() == 7);
  CHECK(cfg.methods[5].weighting == core::WeightingMode::Welford);
  CHECK(cfg.methods[0].kind == harness::MethodKind::Ogmm);
  const harness::ExperimentConfig again = harness::config_from_json(harness::config_to_json(cfg));
  CHECK(harness::config_to_json(again) == harness::config_to_json(cfg));
}

TEST_CASE("configuration errors are reported") {
  json doc = base_config();
  doc["extra"] = 1;
  check_format_error(doc, "extra");

  doc = base_config();
  doc["schema_version"] = 2;
  check_format_error(doc, "schema_version");

  doc = base_config();
  doc.erase("batch_size");
  doc.erase("batches");
  doc["checkpoints"] = {100, 300, 300};
  check_format_error(doc, "increasing");

  doc = base_config();
  doc["checkpoints"] = {100, 200};
  check_format_error(doc, "checkpoints");

  doc = base_config();
  doc["methods"].push_back({{"kind", "leqr"}});
  check_format_error(doc, "leqr");

  doc = base_config();
  doc["methods"].push_back({{"kind", "ogmm"}, {"weighting", "welford"}});
  check_format_error(doc, "duplicate");

  doc = base_config();
  doc["methods"][0]["kind"] = "mcmc";
  CHECK_THROWS_AS(harness::config_from_json(doc), FormatError);

  doc = base_config();
  doc["methods"][5]["weighting"] = "fixed";
  check_format_error(doc, "anomaly");

  doc = base_config();
  doc["model"]["id"] = 12;
  CHECK_THROWS_AS(harness::config_from_json(doc), Error);

  doc = base_config();
  doc["reps"] = "many";
  CHECK_THROWS_AS(harness::config_from_json(doc), FormatError);
}

TEST_CASE("repeated runs produce identical metrics") {
  harness::ExperimentConfig cfg = harness::config_from_json(base_config());
  cfg.threads = 1;
  const auto first = harness::run_experiment(cfg);
  const auto second = harness::run_experiment(cfg);
  CHECK(first.failures.empty());
  REQUIRE(first.rows.size() == 7 * 4);
  CHECK(csv_without_time(first.rows) == csv_without_time(second.rows));

  // rows are grouped by method in configuration order, then by checkpoint
  CHECK(first.rows[0].method == "ogmm-welford");
  CHECK(first.rows[0].b == 2);
  CHECK(first.rows[0].N == 500);
  CHECK(first.rows[3].b == 5);
  CHECK(first.rows[4].method != first.rows[0].method);

  for (const auto& row : first.rows) {
    CAPTURE(row.method);
    CHECK(row.reps == 6);
    CHECK(row.failures == 0);
    const bool is_test = row.method.rfind("tf-", 0) == 0 || row.method.rfind("tu-", 0) == 0;
    CHECK(std::isnan(row.mse) == is_test);
    CHECK(std::isnan(row.coverage) == (is_test || row.method == "tsls"));
    CHECK(std::isnan(row.rejection_rate) == (row.method == "tsls"));
  }
}

TEST_CASE("thread count does not change the aggregates") {
  harness::ExperimentConfig cfg = harness::config_from_json(base_config());
  cfg.threads = 1;
  const auto serial = harness::run_experiment(cfg);
  cfg.threads = 4;
  const auto parallel = harness::run_experiment(cfg);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    const auto &a = serial.rows[i], &b = parallel.rows[i];
    CAPTURE(a.method);
    CAPTURE(a.b);
    CHECK(a.method == b.method);
    CHECK(a.N == b.N);
    CHECK(a.reps == b.reps);
    CHECK(same(a.mse, b.mse));
    CHECK(same(a.mae, b.mae));
    CHECK(same(a.coverage, b.coverage));
    CHECK(same(a.rejection_rate, b.rejection_rate));
  }
}

TEST_CASE("different seeds give different replications") {
  harness::ExperimentConfig cfg = harness::config_from_json(base_config());
  cfg.threads = 1;
  cfg.reps = 2;
  const auto a = harness::run_experiment(cfg);
  cfg.seed += 100;
  const auto b = harness::run_experiment(cfg);
  CHECK(a.rows[0].mse != b.rows[0].mse);
}

TEST_CASE("failed replications are recorded and excluded") {
  // Two rows cannot identify the p = 5, q = 20 design, so the first-batch
  // estimate fails in every replication.
  json doc = base_config();
  doc["model"] = {{"id", 1}};
  doc["methods"] = json::array({json{{"kind", "ogmm"}, {"weighting", "welford"}}});
  doc.erase("batch_size");
  doc.erase("batches");
  doc["checkpoints"] = {2, 200, 400};
  doc["init"] = "tsls";
  doc["reps"] = 3;
  harness::ExperimentConfig cfg = harness::config_from_json(doc);
  cfg.threads = 2;
  const auto result = harness::run_experiment(cfg);
  REQUIRE(result.failures.size() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(result.failures[std::size_t(r)].rep == r);
    CHECK(result.failures[std::size_t(r)].seed == cfg.seed + std::uint64_t(r));
    CHECK_FALSE(result.failures[std::size_t(r)].error.empty());
  }
  REQUIRE(result.rows.size() == 2);
  for (const auto& row : result.rows) {
    CHECK(row.reps == 0);
    CHECK(row.failures == 3);
    CHECK(std::isnan(row.mse));
  }
  const json side = harness::result_sidecar(cfg, result);
  CHECK(side.at("failures").size() == 3);
  CHECK(side.at("environment").contains("compiler"));
}
