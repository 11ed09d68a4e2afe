#pragma once

// The central state: every team's aircraft states at one step index, and
// the per-team views cut from it. The offline environment and the state
// server both assemble through CentralHub, so the two paths cannot drift.

#include <aerogym/dynamics.hpp>
#include <aerogym/error.hpp>
#include <aerogym/team_config.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace aerogym {

/// (north, east, down, roll, pitch, yaw): what an opponent can see.
using Pose = std::array<double, 6>;

Pose restrict_opponent_state(const AircraftState& full);

struct CentralState {
    std::int64_t step_index = 0;
    std::map<ResolvedAircraft, AircraftState> entries;
    std::set<ResolvedAircraft> frozen;
};

struct OpponentPose {
    ResolvedAircraft id;
    Pose pose{};

    friend bool operator==(const OpponentPose&, const OpponentPose&) = default;
};

/// What one team receives at a step: restricted poses of every other team's
/// aircraft in (team, callsign) order, and full states of its declared
/// reward targets.
struct TeamView {
    std::int64_t step_index = 0;
    std::vector<OpponentPose> opponents;
    std::map<std::string, std::vector<AircraftState>> reward_targets;  // by own callsign
    std::optional<std::string> episode_end;

    friend bool operator==(const TeamView&, const TeamView&) = default;
};

TeamView build_team_view(const CentralState& state, const std::string& team,
                         const ResolvedTargets& targets, std::optional<std::string> episode_end);

/// step_index travels in the message envelope, not in this body.
nlohmann::json team_view_to_json(const TeamView& view);
TeamView team_view_from_json(const nlohmann::json& j, std::int64_t step_index);

/// A team announcing itself together with its step-0 states.
struct TeamJoin {
    std::string team;
    std::vector<AircraftId> roster;
    std::map<std::string, std::vector<AircraftRef>> targets;
    double episode_time = kDefaultEpisodeTime;
    std::vector<AircraftState> initial_states;  // roster order
};

nlohmann::json team_join_to_json(const TeamJoin& join);
/// Throws ProtocolError("malformed_join").
TeamJoin team_join_from_json(const nlohmann::json& j, const std::string& team);

struct TeamReport {
    std::string team;
    std::int64_t step_index = 0;
    std::vector<AircraftState> states;  // roster order
    std::vector<bool> frozen;
    bool done = false;
};

nlohmann::json team_report_to_json(const TeamReport& report);
/// Throws ProtocolError("malformed_report").
TeamReport team_report_from_json(const nlohmann::json& j, const std::string& team,
                                 std::int64_t step_index);

/// Episode end reasons carried in views and EPISODE_END messages.
namespace end_reason {
inline constexpr const char* team_done = "team_done";
inline constexpr const char* budget_exhausted = "budget_exhausted";
inline constexpr const char* team_timeout = "team_timeout";
inline constexpr const char* team_disconnected = "team_disconnected";
inline constexpr const char* desync = "desync";
inline constexpr const char* protocol_error = "protocol_error";
inline constexpr const char* invalid_targets = "invalid_targets";
}  // namespace end_reason

/// Inter-team validation failure at start, naming the team at fault.
struct StartError : ConfigError {
    StartError(std::string team, const ConfigError& cause)
        : ConfigError(cause.code(), "team '" + team + "': " + cause.what()), team(std::move(team)) {}
    std::string team;
};

/// Barrier assembly of the central state.
class CentralHub {
public:
    struct Assembly {
        CentralState state;
        std::map<std::string, TeamView> views;
        std::optional<std::string> end_reason;
    };

    explicit CentralHub(double dt);

    double dt() const { return dt_; }
    bool started() const { return started_; }
    bool ended() const { return ended_; }
    std::size_t team_count() const { return teams_.size(); }
    bool has_team(const std::string& name) const { return teams_.contains(name); }
    /// Smallest step budget over admitted teams.
    std::int64_t step_budget() const;
    /// Index of the last assembled central state.
    std::int64_t step_index() const { return state_.step_index; }
    const CentralState& state() const { return state_; }

    /// Throws ConfigError("duplicate_team_name") or EnvironmentError("started").
    void admit(TeamJoin join);
    void remove(const std::string& team);

    /// Resolves every team's reward targets against all rosters and
    /// assembles step 0. Throws StartError.
    Assembly start();

    /// Stores a report. Returns the assembly for step t once every team has
    /// reported t. Throws ProtocolError("desync") for a wrong step index and
    /// ProtocolError("malformed_report") for a roster mismatch.
    std::optional<Assembly> submit(TeamReport report);

    /// Teams whose report for the pending step is still missing.
    std::vector<std::string> waiting_on() const;

private:
    struct Team {
        TeamJoin join;
        ResolvedTargets targets;
        std::int64_t budget = 0;
        std::optional<TeamReport> pending;
    };

    Assembly assemble(std::optional<std::string> end_reason);

    double dt_;
    bool started_ = false;
    bool ended_ = false;
    std::map<std::string, Team> teams_;
    CentralState state_;
};

}  // namespace aerogym
