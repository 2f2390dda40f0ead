#pragma once

#include <json.hpp>

#include "pdsplit/estimators.hpp"
#include "pdsplit/solvers.hpp"

// Lossless JSON round-trips for solver and estimator states, so runs can be
// suspended and resumed bit-identically.

namespace pdsplit {

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PddyState& s);
PddyState pddy_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Pd3oState& s);
Pd3oState pd3o_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CondatVuState& s);
CondatVuState condat_vu_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LicoState& s);
LicoState lico_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PriLicoState& s);
PriLicoState prilico_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DestroyState& s);
DestroyState destroy_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Estimator& e);
Estimator estimator_from_json(const nlohmann::json& j);

}  // namespace pdsplit
