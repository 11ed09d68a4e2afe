#pragma once

// Physics-based autopilot primitives: a clamped PID and six controllers
// built on it, plus the static/dynamic target tasks that go with them.

#include <aerogym/dynamics.hpp>
#include <aerogym/team_config.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aerogym {

struct PidState {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double integrator = 0.0;
    double prev_error = 0.0;
    Interval output_limits{-1.0, 1.0};
    Interval integrator_limits{-1.0, 1.0};
};

struct PidOutput {
    double command = 0.0;
    PidState state;
};

/// command = clamp(kp*e + ki*I' + kd*(e - prev_e)/dt), I' = clamp(I + e*dt).
/// Throws ControllerDomainError on non-finite error or dt <= 0.
PidOutput pid_step(const PidState& pid, double error, double dt);

enum class ControllerType {
    altitude_hold,
    roll_hold,
    pitch_hold,
    heading_hold,
    airspeed_hold,
    level_flight,
};

enum class TargetMode { fixed, dynamic };

std::string_view to_string(ControllerType type);
std::optional<ControllerType> controller_type_from_string(std::string_view name);

/// Admissible target range per controller (SI units: m, rad, m/s).
Interval target_envelope(ControllerType type);

/// Controller selection plus its target. Static targets use `target`;
/// dynamic targets re-draw from `envelope` every 30 simulated seconds.
struct ControllerKind {
    ControllerType type = ControllerType::level_flight;
    TargetMode mode = TargetMode::fixed;
    double target = 0.0;
    Interval envelope;

    static ControllerKind fixed(ControllerType type, double target);
    static ControllerKind dynamic(ControllerType type, std::optional<Interval> envelope = {});

    TargetSchedule schedule() const;
    /// Throws ConfigError("target_out_of_envelope") when outside the envelope.
    void validate() const;
};

/// Everything a controller carries between steps.
struct ControllerMemory {
    ControlInputs trim;
    double trim_pitch = 0.0;
    double trim_airspeed = 0.0;
    double trim_altitude = 0.0;
    std::uint64_t seed = 0;  // keys the dynamic target schedule
    GainTable gains;
    PidState outer;     // altitude -> pitch, heading -> bank
    PidState inner;     // attitude -> surface
    PidState throttle;  // airspeed -> throttle
};

/// Builds memory for `kind` around the trim point the aircraft starts from.
/// Gains come from the preset's controllers section.
ControllerMemory init_controller(const ControllerKind& kind, const AircraftParams& params,
                                 const TrimResult& trim, std::uint64_t seed);

struct ControlOutput {
    ControlInputs controls;
    ControllerMemory memory;
};

ControlOutput control(const ControllerKind& kind, const AircraftState& state, double dt,
                      const ControllerMemory& memory);

/// TaskSpec for a controller kind: reference reward, stall / attitude
/// envelope terminal, and the kind's target schedule.
TaskSpec make_task(const ControllerKind& kind);

/// Tasks by registered name; `parameters` as written in team files.
/// Throws ConfigError("unknown_task") for an unregistered name.
TaskSpec make_task_by_name(std::string_view name, const nlohmann::json& parameters);
std::vector<std::string> task_names();

/// The controller a task was built for (none for the dummy task).
std::optional<ControllerKind> controller_for_task(const TaskSpec& task);

/// Terminal envelope shared by the controller tasks.
inline constexpr double kMaxAbsRoll = 80.0 * 3.14159265358979323846 / 180.0;
inline constexpr double kMaxAbsPitch = 60.0 * 3.14159265358979323846 / 180.0;

}  // namespace aerogym
