#pragma once

// Gym-style environment. One Environment drives one team: reset binds the
// team and returns the step-0 observation; step takes the horizontally
// stacked actions (aileron, elevator, rudder, throttle per aircraft, roster
// order). The central state lives behind a CentralLink: embedded for offline
// use, remote for the online modes.

#include <aerogym/central_state.hpp>
#include <aerogym/dynamics.hpp>
#include <aerogym/team_config.hpp>

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aerogym {

inline constexpr std::size_t kActionsPerAircraft = 4;

/// One row per opponent aircraft; the column count is fixed by the type.
using OpponentMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>;

struct Observation {
    std::vector<std::vector<double>> team_state;  // roster order, per task extractor
    OpponentMatrix opponent_states;               // rows in (team, callsign) order
    std::vector<ResolvedAircraft> opponent_ids;   // labels for the rows
};

struct StepResult {
    Observation observation;
    std::vector<double> rewards;  // roster order
    bool done = false;
    nlohmann::json info = nlohmann::json::object();
};

nlohmann::json observation_to_json(const Observation& obs);
nlohmann::json step_result_to_json(const StepResult& result);

/// Episode seed for the n-th reset (n = 0 for the first) of an environment
/// constructed with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode);

/// Per-team simulation: initialization, dynamics, rewards, terminals.
/// Shared by every environment variant.
class TeamRuntime {
public:
    /// Samples initial conditions and trims every roster aircraft.
    TeamRuntime(TeamConfig config, double dt, std::uint64_t episode_seed);

    const TeamConfig& config() const { return config_; }
    std::size_t size() const { return config_.roster.size(); }
    double dt() const { return dt_; }
    void set_dt(double dt);
    std::uint64_t episode_seed() const { return episode_seed_; }
    std::uint64_t aircraft_seed(std::size_t i) const { return seeds_[i]; }
    const AircraftParams& params(std::size_t i) const { return params_[i]; }
    const TrimResult& initial_trim(std::size_t i) const { return trims_[i]; }
    const std::vector<AircraftState>& states() const { return states_; }
    const std::vector<ControlInputs>& actions() const { return actions_; }
    bool frozen(std::size_t i) const { return terminal_[i].has_value(); }
    const std::optional<std::string>& terminal_reason(std::size_t i) const { return terminal_[i]; }
    std::int64_t step_index() const { return step_index_; }
    std::int64_t step_budget() const { return budget_; }
    bool done() const { return done_; }

    TeamJoin join_request() const;
    Observation observe(const TeamView& view) const;

    /// Applies the actions and advances every live aircraft by one step.
    /// Throws EnvironmentError("action_length") or ("step_after_done").
    TeamReport advance(std::span<const double> actions);
    /// Finishes the step with the central view for the same step index.
    StepResult complete(const TeamView& view);

private:
    TeamConfig config_;
    double dt_;
    std::uint64_t episode_seed_;
    std::int64_t budget_;
    std::vector<std::uint64_t> seeds_;
    std::vector<AircraftParams> params_;
    std::vector<TrimResult> trims_;
    std::vector<AircraftState> states_;
    std::vector<AircraftState> prev_states_;
    std::vector<ControlInputs> actions_;
    std::vector<ControlInputs> prev_actions_;
    std::vector<std::optional<std::string>> terminal_;
    std::vector<bool> frozen_before_;   // frozen before the step in flight
    std::vector<bool> faulted_;         // dynamics raised during the step in flight
    std::vector<bool> clamped_;
    std::int64_t step_index_ = 0;
    bool own_done_ = false;
    bool done_ = false;
    bool awaiting_view_ = false;
};

struct JoinResult {
    double dt = kDefaultDt;  // authoritative step size
    TeamView view;           // step 0
};

/// The team's connection to the central state.
class CentralLink {
public:
    virtual ~CentralLink() = default;
    virtual JoinResult join(const TeamJoin& join, double requested_dt) = 0;
    /// Blocks until the central state for report.step_index is available.
    virtual TeamView report(const TeamReport& report) = 0;
};

/// Offline single-team link: the central state is built into the environment.
class EmbeddedLink final : public CentralLink {
public:
    JoinResult join(const TeamJoin& join, double requested_dt) override;
    TeamView report(const TeamReport& report) override;

private:
    std::optional<CentralHub> hub_;
    std::string team_;
};

struct EnvironmentOptions {
    double dt = kDefaultDt;
    std::uint64_t seed = 0;
};

class Environment {
public:
    explicit Environment(std::unique_ptr<CentralLink> link, EnvironmentOptions options = {});

    /// The first call binds `team`; later calls ignore the argument and
    /// restart the bound team with freshly sampled initial conditions.
    Observation reset(const TeamConfig& team);
    StepResult step(std::span<const double> actions);

    bool bound() const { return config_.has_value(); }
    const TeamRuntime& runtime() const;
    double dt() const { return options_.dt; }

private:
    std::unique_ptr<CentralLink> link_;
    EnvironmentOptions options_;
    std::optional<TeamConfig> config_;
    std::optional<TeamRuntime> runtime_;
    std::uint64_t episodes_ = 0;
};

/// Several teams in one process and one thread, sharing an embedded hub.
class OfflineSimulation {
public:
    OfflineSimulation(std::vector<TeamConfig> teams, EnvironmentOptions options = {});

    std::map<std::string, Observation> reset();
    std::map<std::string, StepResult> step(const std::map<std::string, std::vector<double>>& actions);

    bool done() const { return done_; }
    const TeamRuntime& runtime(const std::string& team) const;
    const CentralState& central_state() const { return hub_->state(); }
    std::vector<std::string> team_names() const;

private:
    std::vector<TeamConfig> teams_;
    EnvironmentOptions options_;
    std::map<std::string, TeamRuntime> runtimes_;
    std::optional<CentralHub> hub_;
    std::uint64_t episodes_ = 0;
    bool done_ = false;
};

}  // namespace aerogym
