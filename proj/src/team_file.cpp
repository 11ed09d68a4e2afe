#include <aerogym/team_file.hpp>

#include <aerogym/controllers.hpp>
#include <aerogym/error.hpp>

#include <fstream>
#include <sstream>

namespace aerogym {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw ConfigError("invalid_team_file", what); }

const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) malformed(where + ": missing '" + key + "'");
    return *it;
}

std::string string_field(const nlohmann::json& j, const char* key, const std::string& where) {
    const auto& v = field(j, key, where);
    if (!v.is_string()) malformed(where + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

TeamConfig team_from_json(const nlohmann::json& j) {
    if (!j.is_object()) malformed("team file must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "name" && key != "roster" && key != "reward_function_targets" && key != "episode_time") {
            malformed("unknown key '" + key + "'");
        }
    }
    TeamConfig team;
    team.name = string_field(j, "name", "team");
    if (j.contains("episode_time")) {
        if (!j.at("episode_time").is_number()) malformed("'episode_time' must be a number");
        team.episode_time = j.at("episode_time").get<double>();
    }

    const auto& roster = field(j, "roster", "team");
    if (!roster.is_array()) malformed("'roster' must be an array");
    for (std::size_t i = 0; i < roster.size(); ++i) {
        const auto& e = roster[i];
        const std::string where = "roster[" + std::to_string(i) + "]";
        if (!e.is_object()) malformed(where + " must be an object");
        RosterEntry entry;
        entry.aircraft.model_name = string_field(e, "model_name", where);
        entry.aircraft.callsign = string_field(e, "callsign", where);
        nlohmann::json params = nlohmann::json::object();
        std::string task_name = "dummy";
        if (e.contains("task")) {
            const auto& t = e.at("task");
            if (t.is_string()) {
                task_name = t.get<std::string>();
            } else if (t.is_object()) {
                task_name = string_field(t, "name", where + ".task");
                if (t.contains("parameters")) params = t.at("parameters");
            } else {
                malformed(where + ".task must be a name or an object");
            }
        }
        entry.task = make_task_by_name(task_name, params);
        entry.controller = e.contains("controller") ? string_field(e, "controller", where)
                                                    : std::string(controller_mode::automatic);
        if (entry.controller != controller_mode::automatic && entry.controller != controller_mode::trim &&
            entry.controller != controller_mode::manual) {
            throw ConfigError("unknown_controller", where + ": unknown controller '" + entry.controller +
                                                        "' (expected auto, trim or manual)");
        }
        team.roster.push_back(std::move(entry));
    }

    if (j.contains("reward_function_targets")) {
        const auto& targets = j.at("reward_function_targets");
        if (!targets.is_object()) malformed("'reward_function_targets' must be an object");
        for (const auto& [callsign, list] : targets.items()) {
            if (!list.is_array()) malformed("targets of '" + callsign + "' must be an array");
            auto& refs = team.reward_function_targets[callsign];
            for (const auto& ref : list) {
                if (!ref.is_string()) malformed("targets of '" + callsign + "' must be strings");
                refs.push_back(AircraftRef::parse(ref.get<std::string>()));
            }
        }
    }
    return validate_team(std::move(team));
}

nlohmann::json team_to_json(const TeamConfig& team) {
    nlohmann::json roster = nlohmann::json::array();
    for (const auto& e : team.roster) {
        roster.push_back({{"model_name", e.aircraft.model_name},
                          {"callsign", e.aircraft.callsign},
                          {"task", {{"name", e.task.name}, {"parameters", e.task.parameters}}},
                          {"controller", e.controller.empty() ? std::string(controller_mode::automatic)
                                                              : e.controller}});
    }
    nlohmann::json targets = nlohmann::json::object();
    for (const auto& [callsign, refs] : team.reward_function_targets) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& r : refs) list.push_back(r.to_string());
        targets[callsign] = std::move(list);
    }
    return {{"name", team.name},
            {"episode_time", team.episode_time},
            {"roster", std::move(roster)},
            {"reward_function_targets", std::move(targets)}};
}

TeamConfig load_team_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("team_file_unreadable", "cannot read team file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
        malformed(path.string() + ": " + e.what());
    }
    return team_from_json(j);
}

void save_team_file(const TeamConfig& team, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("team_file_unreadable", "cannot write team file " + path.string());
    out << team_to_json(team).dump(2) << '\n';
}

}  // namespace aerogym
