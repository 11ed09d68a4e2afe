#include <aerogym/controllers.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace aerogym {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

constexpr std::array<std::pair<ControllerType, std::string_view>, 6> kTypeNames{{
    {ControllerType::altitude_hold, "altitude_hold"},
    {ControllerType::roll_hold, "roll_hold"},
    {ControllerType::pitch_hold, "pitch_hold"},
    {ControllerType::heading_hold, "heading_hold"},
    {ControllerType::airspeed_hold, "airspeed_hold"},
    {ControllerType::level_flight, "level_flight"},
}};

// Task name stem per controller: reach_{static,dynamic}_target_<stem>.
std::string_view task_stem(ControllerType type) {
    switch (type) {
        case ControllerType::altitude_hold: return "altitude";
        case ControllerType::roll_hold: return "roll";
        case ControllerType::pitch_hold: return "pitch";
        case ControllerType::heading_hold: return "heading";
        case ControllerType::airspeed_hold: return "airspeed";
        case ControllerType::level_flight: return "level_flight";
    }
    return "";
}

bool is_angle(ControllerType type) {
    return type == ControllerType::roll_hold || type == ControllerType::pitch_hold ||
           type == ControllerType::heading_hold;
}

double gain(const GainTable& gains, const char* name) {
    auto it = gains.find(name);
    if (it == gains.end()) {
        throw PresetError(std::string("controller gain '") + name + "' missing from preset");
    }
    return it->second;
}

// PI loop with symmetric output limit; the integrator is bounded so that
// its contribution alone can at most saturate the output.
PidState make_pi(double kp, double ki, double limit) {
    PidState pid;
    pid.kp = kp;
    pid.ki = ki;
    pid.output_limits = {-limit, limit};
    const double i_limit = ki > 0.0 ? limit / ki : 0.0;
    pid.integrator_limits = {-i_limit, i_limit};
    return pid;
}

void interval_param(const nlohmann::json& j, double scale, Interval* out) {
    if (j.is_number()) {
        *out = Interval::fixed(j.get<double>() * scale);
    } else if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        *out = {j[0].get<double>() * scale, j[1].get<double>() * scale};
        if (!(out->low <= out->high)) {
            throw ConfigError("invalid_task_parameters", "interval low must not exceed high");
        }
    } else {
        throw ConfigError("invalid_task_parameters", "expected a number or [low, high]");
    }
}

InitialCondition parse_initial(const nlohmann::json& params) {
    InitialCondition ic;
    if (!params.contains("initial")) return ic;
    const auto& init = params.at("initial");
    if (!init.is_object()) {
        throw ConfigError("invalid_task_parameters", "'initial' must be an object");
    }
    for (const auto& [key, value] : init.items()) {
        if (key == "airspeed") {
            Interval v;
            interval_param(value, 1.0, &v);
            ic.airspeed = v;
        } else if (key == "altitude") {
            interval_param(value, 1.0, &ic.altitude);
        } else if (key == "yaw_deg") {
            interval_param(value, kDeg, &ic.yaw);
        } else if (key == "yaw") {
            interval_param(value, 1.0, &ic.yaw);
        } else if (key == "north") {
            interval_param(value, 1.0, &ic.north);
        } else if (key == "east") {
            interval_param(value, 1.0, &ic.east);
        } else {
            throw ConfigError("invalid_task_parameters", "unknown initial-condition key '" + key + "'");
        }
    }
    return ic;
}

std::optional<std::string> envelope_terminal(const AircraftState& s, double,
                                             const AircraftParams& params) {
    if (s.airspeed() < params.stall_speed) return std::string("stall");
    if (std::abs(s.roll()) > kMaxAbsRoll || std::abs(s.pitch()) > kMaxAbsPitch) {
        return std::string("attitude_envelope");
    }
    return std::nullopt;
}

double scheduled(const RewardInputs& in) { return in.target.value_or(0.0); }

}  // namespace

PidOutput pid_step(const PidState& pid, double error, double dt) {
    if (!std::isfinite(error)) {
        throw ControllerDomainError("non-finite controller error");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ControllerDomainError("controller dt must be positive");
    }
    PidOutput out{0.0, pid};
    out.state.integrator = std::clamp(pid.integrator + error * dt, pid.integrator_limits.low,
                                      pid.integrator_limits.high);
    const double raw = pid.kp * error + pid.ki * out.state.integrator +
                       pid.kd * (error - pid.prev_error) / dt;
    out.command = std::clamp(raw, pid.output_limits.low, pid.output_limits.high);
    out.state.prev_error = error;
    return out;
}

std::string_view to_string(ControllerType type) {
    for (const auto& [t, name] : kTypeNames) {
        if (t == type) return name;
    }
    return "unknown";
}

std::optional<ControllerType> controller_type_from_string(std::string_view name) {
    for (const auto& [t, n] : kTypeNames) {
        if (n == name) return t;
    }
    return std::nullopt;
}

Interval target_envelope(ControllerType type) {
    switch (type) {
        case ControllerType::altitude_hold: return {100.0, 12000.0};
        case ControllerType::roll_hold: return {-60.0 * kDeg, 60.0 * kDeg};
        case ControllerType::pitch_hold: return {-20.0 * kDeg, 25.0 * kDeg};
        case ControllerType::heading_hold: return {-std::numbers::pi, std::numbers::pi};
        case ControllerType::airspeed_hold: return {20.0, 400.0};
        case ControllerType::level_flight: return Interval::fixed(0.0);
    }
    return {};
}

// Default dynamic-target envelopes; the altitude band assumes the default
// 1000 m start.
static Interval default_dynamic_envelope(ControllerType type) {
    switch (type) {
        case ControllerType::altitude_hold: return {700.0, 1300.0};
        case ControllerType::roll_hold: return {-45.0 * kDeg, 45.0 * kDeg};
        case ControllerType::pitch_hold: return {-5.0 * kDeg, 10.0 * kDeg};
        case ControllerType::heading_hold: return {-90.0 * kDeg, 90.0 * kDeg};
        case ControllerType::airspeed_hold:
            throw ConfigError("invalid_task_parameters",
                              "dynamic airspeed targets need an explicit envelope");
        case ControllerType::level_flight: return Interval::fixed(0.0);
    }
    return {};
}

ControllerKind ControllerKind::fixed(ControllerType type, double target) {
    ControllerKind kind{type, TargetMode::fixed, target, Interval::fixed(target)};
    kind.validate();
    return kind;
}

ControllerKind ControllerKind::dynamic(ControllerType type, std::optional<Interval> envelope) {
    ControllerKind kind{type, TargetMode::dynamic, 0.0,
                        envelope ? *envelope : default_dynamic_envelope(type)};
    kind.target = kind.envelope.low;
    kind.validate();
    return kind;
}

TargetSchedule ControllerKind::schedule() const {
    return mode == TargetMode::fixed ? TargetSchedule::constant(target)
                                     : TargetSchedule::resampled(envelope);
}

void ControllerKind::validate() const {
    if (type == ControllerType::level_flight) return;
    const Interval admissible = target_envelope(type);
    auto check = [&](double x) {
        if (!std::isfinite(x) || !admissible.contains(x)) {
            throw ConfigError("target_out_of_envelope",
                              std::string(to_string(type)) + " target " + std::to_string(x) +
                                  " outside [" + std::to_string(admissible.low) + ", " +
                                  std::to_string(admissible.high) + "]");
        }
    };
    if (mode == TargetMode::fixed) {
        check(target);
    } else {
        check(envelope.low);
        check(envelope.high);
        if (envelope.low > envelope.high) {
            throw ConfigError("target_out_of_envelope", "empty dynamic target envelope");
        }
    }
}

ControllerMemory init_controller(const ControllerKind& kind, const AircraftParams& params,
                                 const TrimResult& trim, std::uint64_t seed) {
    kind.validate();
    ControllerMemory m;
    m.trim = trim.controls;
    m.trim_pitch = trim.state.pitch();
    m.trim_airspeed = trim.state.airspeed();
    m.trim_altitude = trim.state.altitude();
    m.seed = seed;
    const std::string name(to_string(kind.type));
    auto it = params.controller_gains.find(name);
    if (it == params.controller_gains.end()) {
        throw PresetError("preset '" + params.model_name + "' has no gains for " + name);
    }
    m.gains = it->second;
    const GainTable& g = m.gains;
    switch (kind.type) {
        case ControllerType::altitude_hold:
            m.outer = make_pi(gain(g, "alt_kp"), gain(g, "alt_ki"), gain(g, "pitch_limit"));
            m.inner = make_pi(gain(g, "pitch_kp"), gain(g, "pitch_ki"), 1.0);
            m.throttle = make_pi(gain(g, "speed_kp"), gain(g, "speed_ki"), 1.0);
            break;
        case ControllerType::roll_hold:
            m.inner = make_pi(gain(g, "roll_kp"), gain(g, "roll_ki"), 1.0);
            break;
        case ControllerType::pitch_hold:
            m.inner = make_pi(gain(g, "pitch_kp"), gain(g, "pitch_ki"), 1.0);
            break;
        case ControllerType::heading_hold:
            m.outer = make_pi(gain(g, "roll_kp"), 0.0, 1.0);
            m.inner = make_pi(gain(g, "heading_kp"), gain(g, "heading_ki"), 1.0);
            break;
        case ControllerType::airspeed_hold:
            m.throttle = make_pi(gain(g, "speed_kp"), gain(g, "speed_ki"), 1.0);
            break;
        case ControllerType::level_flight:
            m.inner = make_pi(gain(g, "roll_kp"), 0.0, 1.0);
            break;
    }
    return m;
}

ControlOutput control(const ControllerKind& kind, const AircraftState& state, double dt,
                      const ControllerMemory& memory) {
    if (!state.all_finite()) {
        throw ControllerDomainError("non-finite aircraft state");
    }
    ControllerMemory m = memory;
    const GainTable& g = m.gains;
    const double target = kind.schedule().value_at(state.sim_time, m.seed);
    double aileron = m.trim.aileron();
    double elevator = m.trim.elevator();
    double rudder = m.trim.rudder();
    double throttle = m.trim.throttle();
    const double p = state.body_rates.x(), q = state.body_rates.y(), r = state.body_rates.z();

    switch (kind.type) {
        case ControllerType::altitude_hold: {
            const double limit = gain(g, "pitch_limit");
            const PidOutput outer = pid_step(m.outer, target - state.altitude(), dt);
            m.outer = outer.state;
            const double pitch_cmd =
                m.trim_pitch + std::clamp(outer.command - gain(g, "climb_kd") * climb_rate(state),
                                          -limit, limit);
            const PidOutput inner = pid_step(m.inner, pitch_cmd - state.pitch(), dt);
            m.inner = inner.state;
            elevator += inner.command - gain(g, "q_kd") * q;
            const PidOutput speed = pid_step(m.throttle, m.trim_airspeed - state.airspeed(), dt);
            m.throttle = speed.state;
            throttle += speed.command;
            break;
        }
        case ControllerType::roll_hold: {
            const PidOutput inner = pid_step(m.inner, target - state.roll(), dt);
            m.inner = inner.state;
            aileron += inner.command - gain(g, "p_kd") * p;
            break;
        }
        case ControllerType::pitch_hold: {
            const PidOutput inner = pid_step(m.inner, target - state.pitch(), dt);
            m.inner = inner.state;
            elevator += inner.command - gain(g, "q_kd") * q;
            break;
        }
        case ControllerType::heading_hold: {
            const double heading_error = wrap_angle(target - state.yaw());
            const PidOutput inner = pid_step(m.inner, heading_error, dt);
            m.inner = inner.state;
            rudder += inner.command - gain(g, "r_kd") * r;
            const double bank_limit = gain(g, "bank_limit");
            const double bank_cmd =
                std::clamp(gain(g, "bank_per_heading") * heading_error, -bank_limit, bank_limit);
            const PidOutput outer = pid_step(m.outer, bank_cmd - state.roll(), dt);
            m.outer = outer.state;
            aileron += outer.command - gain(g, "p_kd") * p;
            break;
        }
        case ControllerType::airspeed_hold: {
            const PidOutput speed = pid_step(m.throttle, target - state.airspeed(), dt);
            m.throttle = speed.state;
            throttle += speed.command;
            break;
        }
        case ControllerType::level_flight: {
            const PidOutput inner = pid_step(m.inner, -state.roll(), dt);
            m.inner = inner.state;
            aileron += inner.command - gain(g, "p_kd") * p;
            elevator -= gain(g, "q_kd") * q + gain(g, "climb_kd") * climb_rate(state);
            break;
        }
    }
    return {ControlInputs::clamped(aileron, elevator, rudder, throttle), std::move(m)};
}

TaskSpec make_task(const ControllerKind& kind) {
    kind.validate();
    TaskSpec task;
    task.terminal = envelope_terminal;
    if (kind.type == ControllerType::level_flight) {
        task.name = "level_flight";
        task.state_extractor = {StateField::roll, StateField::pitch, StateField::p,
                                StateField::q, StateField::altitude, StateField::airspeed};
        task.reward = [](const RewardInputs& in) {
            return std::exp(-std::abs(in.curr_state.roll()) / (10.0 * kDeg)) *
                   std::exp(-std::abs(climb_rate(in.curr_state)) / 2.0);
        };
        return task;
    }

    const bool fixed = kind.mode == TargetMode::fixed;
    task.name = std::string(fixed ? "reach_static_target_" : "reach_dynamic_target_") +
                std::string(task_stem(kind.type));
    task.target = kind.schedule();
    if (fixed) {
        task.parameters = {{"target", kind.target}};
    } else {
        task.parameters = {{"envelope", {kind.envelope.low, kind.envelope.high}}};
    }

    switch (kind.type) {
        case ControllerType::altitude_hold:
            task.state_extractor = {StateField::altitude, StateField::airspeed, StateField::pitch,
                                    StateField::q, StateField::roll};
            task.reward = [](const RewardInputs& in) {
                return altitude_hold_reward(in.curr_state.altitude(), scheduled(in));
            };
            break;
        case ControllerType::roll_hold:
            task.state_extractor = {StateField::roll, StateField::p, StateField::pitch,
                                    StateField::airspeed};
            task.reward = [](const RewardInputs& in) {
                return roll_hold_reward(in.curr_state.roll(), scheduled(in));
            };
            break;
        case ControllerType::pitch_hold:
            task.state_extractor = {StateField::pitch, StateField::q, StateField::airspeed,
                                    StateField::altitude};
            task.reward = [](const RewardInputs& in) {
                return std::exp(-std::abs(in.curr_state.pitch() - scheduled(in)) / (5.0 * kDeg));
            };
            break;
        case ControllerType::heading_hold:
            task.state_extractor = {StateField::yaw, StateField::r, StateField::roll,
                                    StateField::p, StateField::airspeed};
            task.reward = [](const RewardInputs& in) {
                return std::exp(-std::abs(wrap_angle(in.curr_state.yaw() - scheduled(in))) /
                                (10.0 * kDeg));
            };
            break;
        case ControllerType::airspeed_hold:
            task.state_extractor = {StateField::airspeed, StateField::pitch, StateField::altitude};
            task.reward = [](const RewardInputs& in) {
                return std::exp(-std::abs(in.curr_state.airspeed() - scheduled(in)) / 5.0);
            };
            break;
        case ControllerType::level_flight:
            break;
    }
    return task;
}

std::vector<std::string> task_names() {
    std::vector<std::string> names{"dummy", "level_flight"};
    for (const auto& [type, name] : kTypeNames) {
        if (type == ControllerType::level_flight) continue;
        names.push_back("reach_static_target_" + std::string(task_stem(type)));
        names.push_back("reach_dynamic_target_" + std::string(task_stem(type)));
    }
    std::sort(names.begin(), names.end());
    return names;
}

namespace {

std::optional<ControllerKind> kind_from_name(std::string_view name, const nlohmann::json& params) {
    if (name == "level_flight") {
        return ControllerKind{ControllerType::level_flight, TargetMode::fixed, 0.0,
                              Interval::fixed(0.0)};
    }
    constexpr std::string_view kStatic = "reach_static_target_";
    constexpr std::string_view kDynamic = "reach_dynamic_target_";
    bool fixed = false;
    std::string_view stem;
    if (name.starts_with(kStatic)) {
        fixed = true;
        stem = name.substr(kStatic.size());
    } else if (name.starts_with(kDynamic)) {
        stem = name.substr(kDynamic.size());
    } else {
        return std::nullopt;
    }
    std::optional<ControllerType> type;
    for (const auto& [t, n] : kTypeNames) {
        if (t != ControllerType::level_flight && task_stem(t) == stem) type = t;
    }
    if (!type) return std::nullopt;

    if (fixed) {
        double target = 0.0;
        if (params.contains("target") && params.at("target").is_number()) {
            target = params.at("target").get<double>();
        } else if (is_angle(*type) && params.contains("target_deg") &&
                   params.at("target_deg").is_number()) {
            target = params.at("target_deg").get<double>() * kDeg;
        } else {
            throw ConfigError("invalid_task_parameters",
                              std::string(name) + " needs a numeric 'target'" +
                                  (is_angle(*type) ? " or 'target_deg'" : ""));
        }
        return ControllerKind::fixed(*type, target);
    }
    std::optional<Interval> envelope;
    if (params.contains("envelope")) {
        Interval e;
        interval_param(params.at("envelope"), 1.0, &e);
        envelope = e;
    } else if (is_angle(*type) && params.contains("envelope_deg")) {
        Interval e;
        interval_param(params.at("envelope_deg"), kDeg, &e);
        envelope = e;
    }
    return ControllerKind::dynamic(*type, envelope);
}

}  // namespace

TaskSpec make_task_by_name(std::string_view name, const nlohmann::json& parameters) {
    const nlohmann::json params = parameters.is_null() ? nlohmann::json::object() : parameters;
    if (!params.is_object()) {
        throw ConfigError("invalid_task_parameters", "task parameters must be an object");
    }
    TaskSpec task;
    if (name == "dummy") {
        task = dummy_task();
    } else if (auto kind = kind_from_name(name, params)) {
        task = make_task(*kind);
    } else {
        throw ConfigError("unknown_task", "unknown task '" + std::string(name) + "'");
    }
    task.initial_condition = parse_initial(params);
    task.parameters = params;
    return task;
}

std::optional<ControllerKind> controller_for_task(const TaskSpec& task) {
    return kind_from_name(task.name, task.parameters);
}

}  // namespace aerogym
