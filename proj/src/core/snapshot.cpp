#include "ogmm/core/snapshot.hpp"

#include "ogmm/errors.hpp"

#include <fstream>

namespace ogmm::core {

using nlohmann::json;

json to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected a numeric array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError("expected a numeric array");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw FormatError("expected a matrix object");
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || data.size() != static_cast<std::size_t>(rows * cols))
    throw FormatError("matrix shape does not match its data");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  return m;
}

namespace {

json klrv_to_json(const lrv::KernelLrv& k) {
  const auto st = k.state();
  const auto& c = st.config;
  return json{{"config",
               {{"lambda", c.lambda},
                {"phi", c.phi},
                {"Psi", c.Psi},
                {"Xi", c.Xi},
                {"psi", c.psi},
                {"xi", c.xi},
                {"pilot", c.pilot}}},
              {"dim", st.dim},
              {"n", st.n},
              {"s_prime", st.s_prime},
              {"shift", to_json(st.shift)},
              {"sum", to_json(st.sum)},
              {"a0", to_json(st.a0)},
              {"a_lambda", to_json(st.a_lambda)},
              {"b0", to_json(st.b0)},
              {"b_lambda", to_json(st.b_lambda)},
              {"c0", st.c0},
              {"c_lambda", st.c_lambda},
              {"window", to_json(st.window)}};
}

lrv::KernelLrv klrv_from_json(const json& j) {
  lrv::KernelLrv::State st;
  const json& c = j.at("config");
  st.config.lambda = c.at("lambda").get<int>();
  st.config.phi = c.at("phi").get<double>();
  st.config.Psi = c.at("Psi").get<double>();
  st.config.Xi = c.at("Xi").get<double>();
  st.config.psi = c.at("psi").get<double>();
  st.config.xi = c.at("xi").get<double>();
  st.config.pilot = c.at("pilot").get<std::size_t>();
  st.dim = j.at("dim").get<Index>();
  st.n = j.at("n").get<std::size_t>();
  st.s_prime = j.at("s_prime").get<std::size_t>();
  st.shift = vector_from_json(j.at("shift"));
  st.sum = vector_from_json(j.at("sum"));
  st.a0 = matrix_from_json(j.at("a0"));
  st.a_lambda = matrix_from_json(j.at("a_lambda"));
  st.b0 = vector_from_json(j.at("b0"));
  st.b_lambda = vector_from_json(j.at("b_lambda"));
  st.c0 = j.at("c0").get<double>();
  st.c_lambda = j.at("c_lambda").get<double>();
  st.window = matrix_from_json(j.at("window"));
  return lrv::KernelLrv::restore(st);
}

}  // namespace

json snapshot_to_json(const OgmmState& s, const std::string& model_name) {
  json weighting{{"mode", to_string(s.weighting.mode())},
                 {"W", to_json(s.weighting.weight())},
                 {"pilot", s.weighting.pilot()}};
  if (const auto* w = s.weighting.welford_state())
    weighting["welford"] = {{"n", w->count()}, {"mean", to_json(w->mean())}, {"M2", to_json(w->m2())}};
  if (const auto* k = s.weighting.kernel_state()) weighting["klrv"] = klrv_to_json(*k);
  return json{{"version", kSnapshotVersion},
              {"model", model_name},
              {"b", s.b},
              {"N", s.N},
              {"theta", to_json(s.theta)},
              {"Uprime", to_json(s.Uprime)},
              {"Vprime", to_json(s.Vprime)},
              {"weighting", std::move(weighting)}};
}

OgmmState snapshot_from_json(const json& doc, std::string* model_name) {
  try {
    if (doc.at("version").get<int>() != kSnapshotVersion) throw FormatError("unsupported snapshot version");
    OgmmState s;
    s.b = doc.at("b").get<std::size_t>();
    s.N = doc.at("N").get<std::size_t>();
    s.theta = vector_from_json(doc.at("theta"));
    s.Uprime = vector_from_json(doc.at("Uprime"));
    s.Vprime = matrix_from_json(doc.at("Vprime"));
    if (s.Vprime.rows() != s.Uprime.size() || s.Vprime.cols() != s.theta.size())
      throw FormatError("snapshot shapes are inconsistent");

    const json& w = doc.at("weighting");
    const WeightingMode mode = weighting_mode_from_string(w.at("mode").get<std::string>());
    std::optional<lrv::Welford> welford;
    std::optional<lrv::KernelLrv> kernel;
    if (w.contains("welford")) {
      const json& wf = w.at("welford");
      welford = lrv::Welford::restore(wf.at("n").get<std::size_t>(), vector_from_json(wf.at("mean")),
                                      matrix_from_json(wf.at("M2")));
    }
    if (w.contains("klrv")) kernel = klrv_from_json(w.at("klrv"));
    s.weighting = Weighting::restore(mode, matrix_from_json(w.at("W")), w.at("pilot").get<std::size_t>(),
                                     std::move(welford), std::move(kernel));
    if (model_name) *model_name = doc.value("model", std::string());
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed snapshot: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("malformed snapshot: ") + e.what());
  }
}

void save_snapshot(const std::string& path, const OgmmState& state, const std::string& model_name) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write snapshot to " + path);
  out << snapshot_to_json(state, model_name).dump(1) << '\n';
}

OgmmState load_snapshot(const std::string& path, std::string* model_name) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read snapshot " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(std::string("snapshot is not valid JSON: ") + e.what());
  }
  return snapshot_from_json(doc, model_name);
}

}  // namespace ogmm::core
