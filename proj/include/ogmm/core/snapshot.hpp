#pragma once

#include "ogmm/core/estimator.hpp"

#include <json.hpp>

#include <string>

namespace ogmm::core {

inline constexpr int kSnapshotVersion = 1;

/// JSON form of the full estimator state, including the weighting
/// estimator. Doubles are written with enough digits to round-trip exactly.
nlohmann::json snapshot_to_json(const OgmmState& state, const std::string& model_name);

/// Inverse of snapshot_to_json. Throws FormatError on malformed documents
/// or an unsupported version. `model_name` receives the recorded model.
OgmmState snapshot_from_json(const nlohmann::json& doc, std::string* model_name = nullptr);

void save_snapshot(const std::string& path, const OgmmState& state, const std::string& model_name);
OgmmState load_snapshot(const std::string& path, std::string* model_name = nullptr);

/// Eigen <-> JSON helpers. Vectors are plain arrays; matrices are
/// {"rows", "cols", "data"} with data in row-major order.
nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace ogmm::core
