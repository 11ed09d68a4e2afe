#pragma once

// JSON forms of the core value types. Every document this project writes
// goes through canonical_dump: sorted keys, no whitespace, doubles as the
// shortest decimal that round-trips.

#include <aerogym/dynamics.hpp>

#include <json.hpp>

#include <string>

namespace aerogym {

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

nlohmann::json state_to_json(const AircraftState& state);
AircraftState state_from_json(const nlohmann::json& j);

nlohmann::json controls_to_json(const ControlInputs& controls);
/// Clamps like ControlInputs::clamped.
ControlInputs controls_from_json(const nlohmann::json& j);

/// Throws std::invalid_argument if the document holds a non-finite number.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace aerogym
