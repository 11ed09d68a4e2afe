#include <aerogym/central_state.hpp>

#include <aerogym/serialization.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace aerogym {

Pose restrict_opponent_state(const AircraftState& s) {
    return {s.position_ned.x(), s.position_ned.y(), s.position_ned.z(),
            s.attitude.x(),     s.attitude.y(),     s.attitude.z()};
}

TeamView build_team_view(const CentralState& state, const std::string& team,
                         const ResolvedTargets& targets, std::optional<std::string> episode_end) {
    TeamView view;
    view.step_index = state.step_index;
    view.episode_end = std::move(episode_end);
    for (const auto& [id, s] : state.entries) {
        if (id.team != team) view.opponents.push_back({id, restrict_opponent_state(s)});
    }
    for (const auto& [callsign, refs] : targets) {
        auto& out = view.reward_targets[callsign];
        for (const auto& ref : refs) out.push_back(state.entries.at(ref));
    }
    return view;
}

nlohmann::json team_view_to_json(const TeamView& view) {
    nlohmann::json opponents = nlohmann::json::array();
    for (const auto& o : view.opponents) {
        opponents.push_back({{"team", o.id.team}, {"callsign", o.id.callsign}, {"pose", o.pose}});
    }
    nlohmann::json targets = nlohmann::json::object();
    for (const auto& [callsign, states] : view.reward_targets) {
        auto& list = targets[callsign] = nlohmann::json::array();
        for (const auto& s : states) list.push_back(state_to_json(s));
    }
    return {{"opponents", std::move(opponents)},
            {"reward_targets", std::move(targets)},
            {"episode_end", view.episode_end ? nlohmann::json(*view.episode_end) : nlohmann::json()}};
}

TeamView team_view_from_json(const nlohmann::json& j, std::int64_t step_index) {
    TeamView view;
    view.step_index = step_index;
    for (const auto& o : j.at("opponents")) {
        view.opponents.push_back({{o.at("team").get<std::string>(), o.at("callsign").get<std::string>()},
                                  o.at("pose").get<Pose>()});
    }
    for (const auto& [callsign, states] : j.at("reward_targets").items()) {
        auto& out = view.reward_targets[callsign];
        for (const auto& s : states) out.push_back(state_from_json(s));
    }
    if (!j.at("episode_end").is_null()) view.episode_end = j.at("episode_end").get<std::string>();
    return view;
}

nlohmann::json team_join_to_json(const TeamJoin& join) {
    nlohmann::json roster = nlohmann::json::array();
    for (const auto& id : join.roster) {
        roster.push_back({{"callsign", id.callsign}, {"model_name", id.model_name}});
    }
    nlohmann::json targets = nlohmann::json::object();
    for (const auto& [callsign, refs] : join.targets) {
        auto& list = targets[callsign] = nlohmann::json::array();
        for (const auto& ref : refs) list.push_back(ref.to_string());
    }
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : join.initial_states) states.push_back(state_to_json(s));
    return {{"roster", std::move(roster)},
            {"targets", std::move(targets)},
            {"episode_time", join.episode_time},
            {"initial_states", std::move(states)}};
}

TeamJoin team_join_from_json(const nlohmann::json& j, const std::string& team) {
    try {
        TeamJoin join;
        join.team = team;
        for (const auto& entry : j.at("roster")) {
            join.roster.push_back({entry.at("model_name").get<std::string>(),
                                   entry.at("callsign").get<std::string>()});
        }
        for (const auto& [callsign, refs] : j.at("targets").items()) {
            auto& out = join.targets[callsign];
            for (const auto& ref : refs) out.push_back(AircraftRef::parse(ref.get<std::string>()));
        }
        join.episode_time = j.at("episode_time").get<double>();
        for (const auto& s : j.at("initial_states")) join.initial_states.push_back(state_from_json(s));

        if (team.empty() || team.find('/') != std::string::npos) {
            throw ProtocolError("malformed_join", "invalid team name '" + team + "'");
        }
        if (join.roster.empty() || join.initial_states.size() != join.roster.size()) {
            throw ProtocolError("malformed_join", "roster and initial states disagree");
        }
        if (!(join.episode_time > 0.0) || !std::isfinite(join.episode_time)) {
            throw ProtocolError("malformed_join", "episode_time must be positive");
        }
        for (const auto& s : join.initial_states) {
            if (!s.all_finite()) throw ProtocolError("malformed_join", "non-finite initial state");
        }
        return join;
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError("malformed_join", e.what());
    }
}

nlohmann::json team_report_to_json(const TeamReport& report) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : report.states) states.push_back(state_to_json(s));
    return {{"states", std::move(states)}, {"frozen", report.frozen}, {"done", report.done}};
}

TeamReport team_report_from_json(const nlohmann::json& j, const std::string& team,
                                 std::int64_t step_index) {
    try {
        TeamReport report;
        report.team = team;
        report.step_index = step_index;
        for (const auto& s : j.at("states")) report.states.push_back(state_from_json(s));
        report.frozen = j.at("frozen").get<std::vector<bool>>();
        report.done = j.at("done").get<bool>();
        return report;
    } catch (const std::exception& e) {
        throw ProtocolError("malformed_report", e.what());
    }
}

CentralHub::CentralHub(double dt) : dt_(dt) {
    if (!(dt > 0.0) || dt > kMaxDt) {
        throw ConfigError("invalid_dt", "dt must lie in (0, " + std::to_string(kMaxDt) + "]");
    }
}

std::int64_t CentralHub::step_budget() const {
    std::int64_t budget = std::numeric_limits<std::int64_t>::max();
    for (const auto& [name, team] : teams_) budget = std::min(budget, team.budget);
    return budget;
}

void CentralHub::admit(TeamJoin join) {
    if (started_) throw EnvironmentError("simulation_started", "the simulation already started");
    if (teams_.contains(join.team)) {
        throw ConfigError("duplicate_team_name", "team name '" + join.team + "' is already taken");
    }
    Team team;
    team.budget = episode_step_budget(join.episode_time, dt_);
    const std::string name = join.team;
    team.join = std::move(join);
    teams_.emplace(name, std::move(team));
}

void CentralHub::remove(const std::string& team) {
    if (started_) throw EnvironmentError("simulation_started", "the simulation already started");
    teams_.erase(team);
}

CentralHub::Assembly CentralHub::start() {
    if (started_) throw EnvironmentError("simulation_started", "the simulation already started");
    std::vector<TeamRoster> rosters;
    for (const auto& [name, team] : teams_) {
        TeamRoster r{name, {}};
        for (const auto& id : team.join.roster) r.callsigns.push_back(id.callsign);
        rosters.push_back(std::move(r));
    }
    for (auto& [name, team] : teams_) {
        try {
            team.targets = resolve_targets(name, team.join.targets, rosters);
        } catch (const ConfigError& e) {
            throw StartError(name, e);
        }
    }
    state_ = {};
    for (const auto& [name, team] : teams_) {
        for (std::size_t i = 0; i < team.join.roster.size(); ++i) {
            state_.entries[{name, team.join.roster[i].callsign}] = team.join.initial_states[i];
        }
    }
    started_ = true;
    return assemble(std::nullopt);
}

std::optional<CentralHub::Assembly> CentralHub::submit(TeamReport report) {
    auto it = teams_.find(report.team);
    if (it == teams_.end()) {
        throw ProtocolError("unknown_team", "team '" + report.team + "' is not admitted");
    }
    if (!started_ || ended_) {
        throw ProtocolError("not_running", "no episode is running");
    }
    Team& team = it->second;
    const std::int64_t expected = state_.step_index + 1;
    if (team.pending || report.step_index != expected) {
        throw ProtocolError("desync", "team '" + report.team + "' reported step " +
                                          std::to_string(report.step_index) + ", expected " +
                                          std::to_string(team.pending ? expected + 1 : expected));
    }
    if (report.states.size() != team.join.roster.size() ||
        report.frozen.size() != team.join.roster.size()) {
        throw ProtocolError("malformed_report",
                            "team '" + report.team + "' report does not match its roster");
    }
    team.pending = std::move(report);
    if (!waiting_on().empty()) return std::nullopt;

    state_.step_index = expected;
    bool any_done = false;
    for (auto& [name, t] : teams_) {
        for (std::size_t i = 0; i < t.join.roster.size(); ++i) {
            const ResolvedAircraft id{name, t.join.roster[i].callsign};
            state_.entries[id] = t.pending->states[i];
            if (t.pending->frozen[i]) state_.frozen.insert(id);
        }
        any_done = any_done || t.pending->done;
        t.pending.reset();
    }
    std::optional<std::string> end;
    if (state_.step_index >= step_budget()) {
        end = end_reason::budget_exhausted;
    } else if (any_done) {
        end = end_reason::team_done;
    }
    if (end) ended_ = true;
    return assemble(std::move(end));
}

std::vector<std::string> CentralHub::waiting_on() const {
    std::vector<std::string> out;
    for (const auto& [name, team] : teams_) {
        if (!team.pending) out.push_back(name);
    }
    return out;
}

CentralHub::Assembly CentralHub::assemble(std::optional<std::string> end_reason) {
    Assembly a;
    a.state = state_;
    a.end_reason = end_reason;
    for (const auto& [name, team] : teams_) {
        a.views.emplace(name, build_team_view(state_, name, team.targets, end_reason));
    }
    return a;
}

}  // namespace aerogym
