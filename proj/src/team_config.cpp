#include <aerogym/team_config.hpp>

#include <aerogym/presets.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>

namespace aerogym {

namespace {

constexpr std::array<std::pair<StateField, std::string_view>, 15> kFieldNames{{
    {StateField::north, "north"},
    {StateField::east, "east"},
    {StateField::down, "down"},
    {StateField::roll, "roll"},
    {StateField::pitch, "pitch"},
    {StateField::yaw, "yaw"},
    {StateField::u, "u"},
    {StateField::v, "v"},
    {StateField::w, "w"},
    {StateField::p, "p"},
    {StateField::q, "q"},
    {StateField::r, "r"},
    {StateField::sim_time, "sim_time"},
    {StateField::airspeed, "airspeed"},
    {StateField::altitude, "altitude"},
}};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[noreturn]] void config_error(const std::string& code, const std::string& message) {
    throw ConfigError(code, message);
}

}  // namespace

std::string_view to_string(StateField field) {
    for (const auto& [f, name] : kFieldNames) {
        if (f == field) return name;
    }
    return "unknown";
}

std::optional<StateField> state_field_from_string(std::string_view name) {
    for (const auto& [f, n] : kFieldNames) {
        if (n == name) return f;
    }
    return std::nullopt;
}

const std::vector<StateField>& all_state_fields() {
    static const std::vector<StateField> fields = [] {
        std::vector<StateField> out;
        for (const auto& [f, name] : kFieldNames) out.push_back(f);
        return out;
    }();
    return fields;
}

double extract_field(const AircraftState& s, StateField field) {
    switch (field) {
        case StateField::north: return s.position_ned.x();
        case StateField::east: return s.position_ned.y();
        case StateField::down: return s.position_ned.z();
        case StateField::roll: return s.attitude.x();
        case StateField::pitch: return s.attitude.y();
        case StateField::yaw: return s.attitude.z();
        case StateField::u: return s.body_velocity.x();
        case StateField::v: return s.body_velocity.y();
        case StateField::w: return s.body_velocity.z();
        case StateField::p: return s.body_rates.x();
        case StateField::q: return s.body_rates.y();
        case StateField::r: return s.body_rates.z();
        case StateField::sim_time: return s.sim_time;
        case StateField::airspeed: return s.airspeed();
        case StateField::altitude: return s.altitude();
    }
    return 0.0;
}

std::vector<double> extract_state(const AircraftState& state, std::span<const StateField> fields) {
    std::vector<double> out;
    out.reserve(fields.size());
    for (StateField f : fields) out.push_back(extract_field(state, f));
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

std::uint64_t aircraft_seed(std::uint64_t episode_seed, std::string_view team,
                            std::string_view callsign) {
    return mix_seed(mix_seed(episode_seed, team), callsign);
}

double unit_uniform(std::uint64_t key) {
    return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

double Interval::sample(std::uint64_t key) const {
    if (is_fixed()) return low;
    return low + (high - low) * unit_uniform(key);
}

double cruise_airspeed(const AircraftParams& params) {
    return 0.5 * (params.min_trim_airspeed() + params.max_trim_airspeed());
}

SampledInitialCondition sample_initial_condition(const InitialCondition& ic,
                                                 const AircraftParams& params,
                                                 std::uint64_t seed) {
    SampledInitialCondition out;
    out.airspeed = ic.airspeed ? ic.airspeed->sample(mix_seed(seed, "airspeed"))
                               : cruise_airspeed(params);
    out.altitude = ic.altitude.sample(mix_seed(seed, "altitude"));
    out.yaw = ic.yaw.sample(mix_seed(seed, "yaw"));
    out.north = ic.north.sample(mix_seed(seed, "north"));
    out.east = ic.east.sample(mix_seed(seed, "east"));
    return out;
}

double TargetSchedule::value_at(double sim_time, std::uint64_t seed) const {
    if (mode == Mode::fixed) return value;
    // Small slack so that t = k * period lands in segment k despite rounding.
    const auto segment = static_cast<std::uint64_t>(std::max(0.0, std::floor(sim_time / period + 1e-9)));
    return envelope.sample(mix_seed(mix_seed(seed, "target"), segment));
}

TaskSpec dummy_task() {
    TaskSpec task;
    task.name = "dummy";
    task.state_extractor = all_state_fields();
    task.reward = [](const RewardInputs&) { return 0.0; };
    task.terminal = [](const AircraftState&, double, const AircraftParams&) -> std::optional<std::string> {
        return std::nullopt;
    };
    return task;
}

double altitude_hold_reward(double altitude, double target) {
    return std::exp(-std::abs(altitude - target) / 100.0);
}

double roll_hold_reward(double roll, double target) {
    constexpr double scale = 10.0 * std::numbers::pi / 180.0;
    return std::exp(-std::abs(roll - target) / scale);
}

double action_smoothness_penalty(const ControlInputs& prev, const ControlInputs& curr) {
    const auto a = prev.as_array();
    const auto b = curr.as_array();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = b[i] - a[i];
        sum += d * d;
    }
    return sum;
}

double compute_reward(const TaskSpec& task, const RewardInputs& inputs) {
    if (!task.reward) {
        throw TaskDefinitionError("task '" + task.name + "' has no reward function");
    }
    const double r = task.reward(inputs);
    if (!std::isfinite(r)) {
        throw TaskDefinitionError("task '" + task.name + "' produced a non-finite reward");
    }
    return r;
}

AircraftRef AircraftRef::parse(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        return {"", std::string(text)};
    }
    return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
}

std::string AircraftRef::to_string() const { return team.empty() ? callsign : team + "/" + callsign; }

TeamConfig validate_team(TeamConfig config) {
    if (config.name.empty()) {
        config_error("empty_team_name", "team name must be non-empty");
    }
    if (config.name.find('/') != std::string::npos) {
        config_error("invalid_team_name", "team name '" + config.name + "' must not contain '/'");
    }
    if (config.roster.empty()) {
        config_error("empty_roster", "team '" + config.name + "' has an empty roster");
    }
    if (!(config.episode_time > 0.0) || !std::isfinite(config.episode_time)) {
        config_error("non_positive_episode_time",
                     "team '" + config.name + "' episode_time must be positive");
    }
    const auto presets = preset_names();
    std::set<std::string> callsigns;
    for (const auto& entry : config.roster) {
        const auto& callsign = entry.aircraft.callsign;
        if (callsign.empty()) {
            config_error("empty_callsign", "team '" + config.name + "' has an empty callsign");
        }
        if (callsign.find('/') != std::string::npos) {
            config_error("invalid_callsign", "callsign '" + callsign + "' must not contain '/'");
        }
        if (std::find(presets.begin(), presets.end(), entry.aircraft.model_name) == presets.end()) {
            config_error("unknown_model", "callsign '" + callsign + "' uses unknown model '" +
                                              entry.aircraft.model_name + "'");
        }
        if (!callsigns.insert(callsign).second) {
            config_error("duplicate_callsign",
                         "callsign '" + callsign + "' appears twice in team '" + config.name + "'");
        }
        if (entry.task.state_extractor.empty()) {
            config_error("empty_state_extractor",
                         "task for '" + callsign + "' declares no state fields");
        }
        if (!entry.task.reward || !entry.task.terminal) {
            config_error("incomplete_task", "task for '" + callsign + "' lacks reward or terminal");
        }
    }
    for (const auto& entry : config.roster) {
        if (!config.reward_function_targets.contains(entry.aircraft.callsign)) {
            config_error("missing_target_key", "reward_function_targets has no entry for '" +
                                                   entry.aircraft.callsign + "'");
        }
    }
    for (const auto& [key, targets] : config.reward_function_targets) {
        if (!callsigns.contains(key)) {
            config_error("unknown_target_key",
                         "reward_function_targets key '" + key + "' is not on the roster");
        }
        for (const auto& ref : targets) {
            if (ref.callsign.empty()) {
                config_error("unknown_target", "empty reward target for '" + key + "'");
            }
            const bool own_team = ref.team.empty() || ref.team == config.name;
            if (own_team && ref.callsign == key) {
                config_error("self_target", "'" + key + "' lists itself as a reward target");
            }
            if (ref.team == config.name && !callsigns.contains(ref.callsign)) {
                config_error("unknown_target", "reward target '" + ref.to_string() +
                                                   "' is not on team '" + config.name + "'");
            }
        }
    }
    return config;
}

TeamRoster roster_of(const TeamConfig& config) {
    TeamRoster roster{config.name, {}};
    for (const auto& entry : config.roster) roster.callsigns.push_back(entry.aircraft.callsign);
    return roster;
}

ResolvedTargets resolve_targets(const std::string& team,
                                const std::map<std::string, std::vector<AircraftRef>>& targets,
                                std::span<const TeamRoster> simulation) {
    std::set<std::string> names;
    const TeamRoster* own = nullptr;
    for (const auto& roster : simulation) {
        if (!names.insert(roster.name).second) {
            config_error("duplicate_team_name", "team name '" + roster.name + "' is used twice");
        }
        if (roster.name == team) own = &roster;
    }
    if (own == nullptr) {
        config_error("unknown_team", "team '" + team + "' is not part of the simulation");
    }
    auto has = [](const TeamRoster& r, const std::string& callsign) {
        return std::find(r.callsigns.begin(), r.callsigns.end(), callsign) != r.callsigns.end();
    };

    ResolvedTargets resolved;
    for (const auto& [key, refs] : targets) {
        auto& out = resolved[key];
        for (const auto& ref : refs) {
            ResolvedAircraft hit;
            if (!ref.team.empty()) {
                auto it = std::find_if(simulation.begin(), simulation.end(),
                                       [&](const TeamRoster& r) { return r.name == ref.team; });
                if (it == simulation.end() || !has(*it, ref.callsign)) {
                    config_error("unknown_target",
                                 "reward target '" + ref.to_string() + "' does not exist");
                }
                hit = {ref.team, ref.callsign};
            } else if (has(*own, ref.callsign)) {
                hit = {team, ref.callsign};
            } else {
                int matches = 0;
                for (const auto& roster : simulation) {
                    if (roster.name != team && has(roster, ref.callsign)) {
                        hit = {roster.name, ref.callsign};
                        ++matches;
                    }
                }
                if (matches == 0) {
                    config_error("unknown_target",
                                 "reward target '" + ref.callsign + "' does not exist");
                }
                if (matches > 1) {
                    config_error("ambiguous_target", "reward target '" + ref.callsign +
                                                         "' matches several teams; qualify it");
                }
            }
            if (hit.team == team && hit.callsign == key) {
                config_error("self_target", "'" + key + "' lists itself as a reward target");
            }
            out.push_back(hit);
        }
    }
    return resolved;
}

std::int64_t episode_step_budget(double episode_time, double dt) {
    if (!(dt > 0.0)) {
        throw ConfigError("invalid_dt", "dt must be positive");
    }
    const double steps = episode_time / dt;
    return static_cast<std::int64_t>(std::ceil(steps - 1e-9 * std::max(1.0, steps)));
}

std::int64_t episode_step_budget(const TeamConfig& config, double dt) {
    return episode_step_budget(config.episode_time, dt);
}

}  // namespace aerogym
