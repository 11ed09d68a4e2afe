#pragma once

// Declarative team files:
//
//   {"name": "red",
//    "episode_time": 90,
//    "roster": [{"model_name": "f15", "callsign": "red-one",
//                "task": {"name": "reach_static_target_altitude",
//                         "parameters": {"target": 1100}},
//                "controller": "auto"}],
//    "reward_function_targets": {"red-one": ["blue/lead"]}}

#include <aerogym/team_config.hpp>

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace aerogym {

/// Values accepted in a roster entry's "controller" field.
namespace controller_mode {
inline constexpr std::string_view automatic = "auto";  // the task's controller; trim hold if none
inline constexpr std::string_view trim = "trim";       // hold the initial trim controls
inline constexpr std::string_view manual = "manual";   // a human via the bridge
}  // namespace controller_mode

/// Parses and validates. Structural problems throw
/// ConfigError("invalid_team_file"); rule violations keep validate_team's code.
TeamConfig team_from_json(const nlohmann::json& j);
nlohmann::json team_to_json(const TeamConfig& team);

/// Throws ConfigError("team_file_unreadable") or as team_from_json.
TeamConfig load_team_file(const std::filesystem::path& path);
void save_team_file(const TeamConfig& team, const std::filesystem::path& path);

}  // namespace aerogym
