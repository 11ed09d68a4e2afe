#pragma once

#include <aerogym/dynamics.hpp>

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aerogym {

inline constexpr double kDefaultEpisodeTime = 90.0;  // s

// ---------------------------------------------------------------------------
// State extraction
// ---------------------------------------------------------------------------

enum class StateField {
    north, east, down,
    roll, pitch, yaw,
    u, v, w,
    p, q, r,
    sim_time,
    airspeed, altitude,
};

std::string_view to_string(StateField field);
std::optional<StateField> state_field_from_string(std::string_view name);

/// Every raw AircraftState field followed by the derived scalars.
const std::vector<StateField>& all_state_fields();

double extract_field(const AircraftState& state, StateField field);
std::vector<double> extract_state(const AircraftState& state, std::span<const StateField> fields);

// ---------------------------------------------------------------------------
// Seeded sampling helpers (portable: no std distributions)
// ---------------------------------------------------------------------------

/// Stable 64-bit mix of a seed with a string tag (FNV-1a + splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);
/// Uniform double in [0, 1) from a 64-bit key.
double unit_uniform(std::uint64_t key);

/// Per-aircraft seed derived from the episode seed and the aircraft identity.
std::uint64_t aircraft_seed(std::uint64_t episode_seed, std::string_view team,
                            std::string_view callsign);

struct Interval {
    double low = 0.0;
    double high = 0.0;

    static Interval fixed(double value) { return {value, value}; }
    bool is_fixed() const { return low == high; }
    double sample(std::uint64_t key) const;
    bool contains(double x) const { return x >= low && x <= high; }
};

struct InitialCondition {
    /// Unset: the preset's cruise speed (middle of its trim window).
    std::optional<Interval> airspeed;
    Interval altitude = Interval::fixed(1000.0);  // m
    Interval yaw = Interval::fixed(0.0);          // rad
    Interval north = Interval::fixed(0.0);        // m
    Interval east = Interval::fixed(0.0);         // m
};

struct SampledInitialCondition {
    double airspeed = 0.0;
    double altitude = 0.0;
    double yaw = 0.0;
    double north = 0.0;
    double east = 0.0;
};

SampledInitialCondition sample_initial_condition(const InitialCondition& ic,
                                                 const AircraftParams& params,
                                                 std::uint64_t seed);

double cruise_airspeed(const AircraftParams& params);

/// Scalar target a task steers toward. Static targets are constant;
/// dynamic targets are re-drawn from `envelope` every `period` seconds of
/// simulated time, keyed by the episode seed.
struct TargetSchedule {
    enum class Mode { fixed, resampled };

    Mode mode = Mode::fixed;
    double value = 0.0;
    Interval envelope;
    double period = 30.0;

    static TargetSchedule constant(double v) { return {Mode::fixed, v, Interval::fixed(v), 30.0}; }
    static TargetSchedule resampled(Interval envelope, double period = 30.0) {
        return {Mode::resampled, 0.0, envelope, period};
    }

    double value_at(double sim_time, std::uint64_t seed) const;
};

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

struct RewardInputs {
    const AircraftState& prev_state;
    const AircraftState& curr_state;
    const ControlInputs& prev_action;
    const ControlInputs& curr_action;
    std::span<const AircraftState> target_states;
    std::optional<double> target;  // the task's scheduled target at curr_state.sim_time
};

using RewardFunction = std::function<double(const RewardInputs&)>;
/// Returns the termination reason, or nullopt to continue.
using TerminalPredicate = std::function<std::optional<std::string>(
    const AircraftState& state, double sim_time, const AircraftParams& params)>;

struct TaskSpec {
    std::string name;
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<StateField> state_extractor;
    RewardFunction reward;
    TerminalPredicate terminal;
    InitialCondition initial_condition;
    std::optional<TargetSchedule> target;
};

/// Full-state extractor, zero reward, never terminal, cruise trim start.
TaskSpec dummy_task();

/// exp(-|altitude - target| / 100 m)
double altitude_hold_reward(double altitude, double target);
/// exp(-|roll - target| / 10 deg), angles in radians
double roll_hold_reward(double roll, double target);
/// Sum of squared per-channel differences between consecutive actions.
double action_smoothness_penalty(const ControlInputs& prev, const ControlInputs& curr);

/// Evaluates the task reward; throws TaskDefinitionError for a non-finite result.
double compute_reward(const TaskSpec& task, const RewardInputs& inputs);

// ---------------------------------------------------------------------------
// Teams
// ---------------------------------------------------------------------------

struct AircraftId {
    std::string model_name;
    std::string callsign;

    friend bool operator==(const AircraftId&, const AircraftId&) = default;
};

/// Reference to a reward-target aircraft. An empty team means "resolve by
/// callsign": the own roster first, then a unique match among opponents.
struct AircraftRef {
    std::string team;
    std::string callsign;

    /// "callsign" or "team/callsign".
    static AircraftRef parse(std::string_view text);
    std::string to_string() const;

    friend bool operator==(const AircraftRef&, const AircraftRef&) = default;
};

struct RosterEntry {
    AircraftId aircraft;
    TaskSpec task;
    /// Controller driving this aircraft from the CLI ("manual", a controller
    /// kind, or empty for the task's default).
    std::string controller;
};

struct TeamConfig {
    std::string name;
    std::vector<RosterEntry> roster;
    std::map<std::string, std::vector<AircraftRef>> reward_function_targets;  // by callsign
    double episode_time = kDefaultEpisodeTime;
};

/// Intra-team validation. Returns the config unchanged or throws ConfigError
/// whose code names the first violation.
TeamConfig validate_team(TeamConfig config);

struct ResolvedAircraft {
    std::string team;
    std::string callsign;

    auto operator<=>(const ResolvedAircraft&) const = default;
};

/// Callsigns of one team, as seen by the rest of the simulation.
struct TeamRoster {
    std::string name;
    std::vector<std::string> callsigns;
};

using ResolvedTargets = std::map<std::string, std::vector<ResolvedAircraft>>;  // by callsign

/// Inter-team validation for one team against every roster in the
/// simulation (its own included): team names are unique and each reward
/// target resolves to exactly one aircraft other than the key aircraft.
ResolvedTargets resolve_targets(const std::string& team,
                                const std::map<std::string, std::vector<AircraftRef>>& targets,
                                std::span<const TeamRoster> simulation);

TeamRoster roster_of(const TeamConfig& config);

/// ceil(episode_time / dt), tolerant of representation error in dt.
std::int64_t episode_step_budget(const TeamConfig& config, double dt);
std::int64_t episode_step_budget(double episode_time, double dt);

}  // namespace aerogym
