#include <aerogym/environment.hpp>

#include <aerogym/presets.hpp>

#include <algorithm>

namespace aerogym {

nlohmann::json observation_to_json(const Observation& obs) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < obs.opponent_states.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < obs.opponent_states.cols(); ++c) {
            row.push_back(obs.opponent_states(r, c));
        }
        rows.push_back(std::move(row));
    }
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& id : obs.opponent_ids) ids.push_back(id.team + "/" + id.callsign);
    return {{"team_state", obs.team_state}, {"opponent_states", std::move(rows)}, {"opponent_ids", std::move(ids)}};
}

nlohmann::json step_result_to_json(const StepResult& result) {
    return {{"observation", observation_to_json(result.observation)},
            {"rewards", result.rewards},
            {"done", result.done},
            {"info", result.info}};
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) {
    return episode == 0 ? seed : mix_seed(seed, episode);
}

TeamRuntime::TeamRuntime(TeamConfig config, double dt, std::uint64_t seed)
    : config_(validate_team(std::move(config))),
      dt_(dt),
      episode_seed_(seed),
      budget_(episode_step_budget(config_, dt)) {
    if (!(dt > 0.0) || dt > kMaxDt) {
        throw ConfigError("invalid_dt", "dt must lie in (0, " + std::to_string(kMaxDt) + "]");
    }
    for (const auto& entry : config_.roster) {
        const AircraftParams params = load_preset(entry.aircraft.model_name);
        const std::uint64_t s = ::aerogym::aircraft_seed(seed, config_.name, entry.aircraft.callsign);
        const SampledInitialCondition ic =
            sample_initial_condition(entry.task.initial_condition, params, s);
        TrimResult t = trim(params, ic.airspeed, ic.altitude, ic.yaw);
        t.state.position_ned.x() = ic.north;
        t.state.position_ned.y() = ic.east;
        seeds_.push_back(s);
        params_.push_back(params);
        states_.push_back(t.state);
        trims_.push_back(std::move(t));
    }
    const std::size_t n = size();
    prev_states_ = states_;
    actions_.assign(n, ControlInputs{});
    prev_actions_ = actions_;
    terminal_.assign(n, std::nullopt);
    frozen_before_.assign(n, false);
    faulted_.assign(n, false);
    clamped_.assign(n, false);
}

void TeamRuntime::set_dt(double dt) {
    if (step_index_ != 0) throw EnvironmentError("episode_running", "dt is fixed once stepping starts");
    dt_ = dt;
    budget_ = episode_step_budget(config_, dt);
}

TeamJoin TeamRuntime::join_request() const {
    TeamJoin join;
    join.team = config_.name;
    for (const auto& entry : config_.roster) join.roster.push_back(entry.aircraft);
    join.targets = config_.reward_function_targets;
    join.episode_time = config_.episode_time;
    join.initial_states = states_;
    return join;
}

Observation TeamRuntime::observe(const TeamView& view) const {
    Observation obs;
    for (std::size_t i = 0; i < size(); ++i) {
        obs.team_state.push_back(extract_state(states_[i], config_.roster[i].task.state_extractor));
    }
    obs.opponent_states.resize(static_cast<Eigen::Index>(view.opponents.size()), 6);
    for (std::size_t r = 0; r < view.opponents.size(); ++r) {
        for (std::size_t c = 0; c < 6; ++c) {
            obs.opponent_states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                view.opponents[r].pose[c];
        }
        obs.opponent_ids.push_back(view.opponents[r].id);
    }
    return obs;
}

TeamReport TeamRuntime::advance(std::span<const double> actions) {
    if (done_) {
        throw EnvironmentError("step_after_done", "the episode is over; call reset");
    }
    if (awaiting_view_) {
        throw EnvironmentError("step_pending", "the previous step has not completed");
    }
    if (actions.size() != kActionsPerAircraft * size()) {
        throw EnvironmentError("action_length", "expected " + std::to_string(kActionsPerAircraft * size()) +
                                                    " actions, got " + std::to_string(actions.size()));
    }
    prev_states_ = states_;
    prev_actions_ = actions_;
    for (std::size_t i = 0; i < size(); ++i) {
        const double* a = actions.data() + kActionsPerAircraft * i;
        const ControlInputs controls = ControlInputs::clamped(a[0], a[1], a[2], a[3]);
        actions_[i] = controls;
        clamped_[i] = controls.was_clamped();
        frozen_before_[i] = frozen(i);
        faulted_[i] = false;
        if (frozen_before_[i]) continue;
        try {
            states_[i] = step(states_[i], controls, params_[i], dt_);
        } catch (const StallError& e) {
            terminal_[i] = e.code();
            faulted_[i] = true;
            continue;
        } catch (const DivergenceError& e) {
            terminal_[i] = e.code();
            faulted_[i] = true;
            continue;
        }
        terminal_[i] = config_.roster[i].task.terminal(states_[i], states_[i].sim_time, params_[i]);
    }
    ++step_index_;
    const bool all_terminal =
        std::all_of(terminal_.begin(), terminal_.end(), [](const auto& t) { return t.has_value(); });
    own_done_ = step_index_ >= budget_ || all_terminal;
    awaiting_view_ = true;

    TeamReport report;
    report.team = config_.name;
    report.step_index = step_index_;
    report.states = states_;
    for (std::size_t i = 0; i < size(); ++i) report.frozen.push_back(frozen(i));
    report.done = own_done_;
    return report;
}

StepResult TeamRuntime::complete(const TeamView& view) {
    if (!awaiting_view_ || view.step_index != step_index_) {
        throw EnvironmentError("desync", "central state for step " + std::to_string(view.step_index) +
                                             " does not match local step " +
                                             std::to_string(step_index_));
    }
    awaiting_view_ = false;

    StepResult result;
    nlohmann::json aircraft = nlohmann::json::object();
    bool all_terminal = true;
    for (std::size_t i = 0; i < size(); ++i) {
        const auto& entry = config_.roster[i];
        double reward = 0.0;
        if (!frozen_before_[i] && !faulted_[i]) {
            static const std::vector<AircraftState> kNoTargets;
            auto it = view.reward_targets.find(entry.aircraft.callsign);
            const auto& targets = it == view.reward_targets.end() ? kNoTargets : it->second;
            std::optional<double> target;
            if (entry.task.target) target = entry.task.target->value_at(states_[i].sim_time, seeds_[i]);
            reward = compute_reward(entry.task, {prev_states_[i], states_[i], prev_actions_[i],
                                                 actions_[i], targets, target});
        }
        result.rewards.push_back(reward);
        all_terminal = all_terminal && terminal_[i].has_value();
        aircraft[entry.aircraft.callsign] = {
            {"terminal", terminal_[i] ? nlohmann::json(*terminal_[i]) : nlohmann::json()},
            {"frozen", static_cast<bool>(frozen_before_[i])},
            {"clamped", static_cast<bool>(clamped_[i])},
        };
    }
    done_ = own_done_ || view.episode_end.has_value();
    result.done = done_;
    result.observation = observe(view);

    nlohmann::json& info = result.info;
    info["step_index"] = step_index_;
    info["seed"] = episode_seed_;
    info["aircraft"] = std::move(aircraft);
    if (done_) {
        if (step_index_ >= budget_) {
            info["done_reason"] = "budget_exhausted";
        } else if (all_terminal) {
            info["done_reason"] = "all_terminal";
        } else {
            info["done_reason"] = "simulation_ended";
        }
        info["episode_end"] = view.episode_end ? nlohmann::json(*view.episode_end) : nlohmann::json();
        info["truncated"] = step_index_ < budget_ && !all_terminal;
    }
    return result;
}

JoinResult EmbeddedLink::join(const TeamJoin& join, double requested_dt) {
    hub_.emplace(requested_dt);
    team_ = join.team;
    hub_->admit(join);
    return {requested_dt, hub_->start().views.at(team_)};
}

TeamView EmbeddedLink::report(const TeamReport& report) {
    if (!hub_) throw EnvironmentError("not_reset", "call reset before step");
    auto assembly = hub_->submit(report);
    return assembly->views.at(team_);
}

Environment::Environment(std::unique_ptr<CentralLink> link, EnvironmentOptions options)
    : link_(std::move(link)), options_(options) {}

Observation Environment::reset(const TeamConfig& team) {
    if (!config_) config_ = validate_team(team);
    runtime_.reset();
    TeamRuntime runtime(*config_, options_.dt, episode_seed(options_.seed, episodes_++));
    const JoinResult joined = link_->join(runtime.join_request(), options_.dt);
    if (joined.dt != options_.dt) {
        options_.dt = joined.dt;
        runtime.set_dt(joined.dt);
    }
    runtime_.emplace(std::move(runtime));
    return runtime_->observe(joined.view);
}

StepResult Environment::step(std::span<const double> actions) {
    if (!runtime_) throw EnvironmentError("not_reset", "call reset before step");
    const TeamReport report = runtime_->advance(actions);
    return runtime_->complete(link_->report(report));
}

const TeamRuntime& Environment::runtime() const {
    if (!runtime_) throw EnvironmentError("not_reset", "call reset first");
    return *runtime_;
}

OfflineSimulation::OfflineSimulation(std::vector<TeamConfig> teams, EnvironmentOptions options)
    : options_(options) {
    for (auto& t : teams) teams_.push_back(validate_team(std::move(t)));
}

std::map<std::string, Observation> OfflineSimulation::reset() {
    runtimes_.clear();
    hub_.emplace(options_.dt);
    const std::uint64_t seed = episode_seed(options_.seed, episodes_++);
    for (const auto& config : teams_) {
        TeamRuntime runtime(config, options_.dt, seed);
        hub_->admit(runtime.join_request());
        runtimes_.emplace(config.name, std::move(runtime));
    }
    const CentralHub::Assembly start = hub_->start();
    done_ = false;
    std::map<std::string, Observation> out;
    for (const auto& [name, runtime] : runtimes_) out.emplace(name, runtime.observe(start.views.at(name)));
    return out;
}

std::map<std::string, StepResult> OfflineSimulation::step(
    const std::map<std::string, std::vector<double>>& actions) {
    if (!hub_) throw EnvironmentError("not_reset", "call reset before step");
    if (done_) throw EnvironmentError("step_after_done", "the episode is over; call reset");
    for (const auto& [name, runtime] : runtimes_) {
        auto it = actions.find(name);
        if (it == actions.end()) {
            throw EnvironmentError("action_length", "no actions for team '" + name + "'");
        }
        if (it->second.size() != kActionsPerAircraft * runtime.size()) {
            throw EnvironmentError("action_length", "team '" + name + "' expects " +
                                                        std::to_string(kActionsPerAircraft * runtime.size()) +
                                                        " actions");
        }
    }
    std::optional<CentralHub::Assembly> assembly;
    for (auto& [name, runtime] : runtimes_) {
        assembly = hub_->submit(runtime.advance(actions.at(name)));
    }
    std::map<std::string, StepResult> out;
    for (auto& [name, runtime] : runtimes_) out.emplace(name, runtime.complete(assembly->views.at(name)));
    done_ = assembly->end_reason.has_value();
    return out;
}

const TeamRuntime& OfflineSimulation::runtime(const std::string& team) const {
    auto it = runtimes_.find(team);
    if (it == runtimes_.end()) throw EnvironmentError("unknown_team", "no team '" + team + "'");
    return it->second;
}

std::vector<std::string> OfflineSimulation::team_names() const {
    std::vector<std::string> names;
    for (const auto& t : teams_) names.push_back(t.name);
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace aerogym
