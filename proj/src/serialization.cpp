#include <aerogym/serialization.hpp>

#include <cmath>
#include <stdexcept>

namespace aerogym {

namespace {

void require_finite(const nlohmann::json& j) {
    if (j.is_number_float() && !std::isfinite(j.get<double>())) {
        throw std::invalid_argument("non-finite number in document");
    }
    if (j.is_structured()) {
        for (const auto& child : j) {
            require_finite(child);
        }
    }
}

double finite_number(const nlohmann::json& j) {
    if (!j.is_number()) {
        throw std::invalid_argument("expected a number");
    }
    return j.get<double>();
}

}  // namespace

nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument("expected a 3-element array");
    }
    return Vec3(finite_number(j[0]), finite_number(j[1]), finite_number(j[2]));
}

nlohmann::json state_to_json(const AircraftState& s) {
    return {
        {"position_ned", vec3_to_json(s.position_ned)},
        {"attitude", vec3_to_json(s.attitude)},
        {"body_velocity", vec3_to_json(s.body_velocity)},
        {"body_rates", vec3_to_json(s.body_rates)},
        {"sim_time", s.sim_time},
    };
}

AircraftState state_from_json(const nlohmann::json& j) {
    AircraftState s;
    s.position_ned = vec3_from_json(j.at("position_ned"));
    s.attitude = vec3_from_json(j.at("attitude"));
    s.body_velocity = vec3_from_json(j.at("body_velocity"));
    s.body_rates = vec3_from_json(j.at("body_rates"));
    s.sim_time = finite_number(j.at("sim_time"));
    return s;
}

nlohmann::json controls_to_json(const ControlInputs& c) {
    return {
        {"aileron", c.aileron()},
        {"elevator", c.elevator()},
        {"rudder", c.rudder()},
        {"throttle", c.throttle()},
    };
}

ControlInputs controls_from_json(const nlohmann::json& j) {
    return ControlInputs::clamped(finite_number(j.at("aileron")), finite_number(j.at("elevator")),
                                  finite_number(j.at("rudder")), finite_number(j.at("throttle")));
}

std::string canonical_dump(const nlohmann::json& j) {
    require_finite(j);
    return j.dump();
}

}  // namespace aerogym
