#pragma once

#include <aerogym/controllers.hpp>
#include <aerogym/dynamics.hpp>
#include <aerogym/team_config.hpp>

#include <array>
#include <cstring>
#include <random>
#include <string>
#include <vector>

namespace aerogym::testing {

inline std::array<double, 13> flatten(const AircraftState& s) {
    return {s.position_ned.x(), s.position_ned.y(), s.position_ned.z(), s.attitude.x(),
            s.attitude.y(),     s.attitude.z(),     s.body_velocity.x(), s.body_velocity.y(),
            s.body_velocity.z(), s.body_rates.x(),  s.body_rates.y(),   s.body_rates.z(),
            s.sim_time};
}

inline bool bit_identical(const AircraftState& a, const AircraftState& b) {
    const auto fa = flatten(a);
    const auto fb = flatten(b);
    return std::memcmp(fa.data(), fb.data(), sizeof(double) * fa.size()) == 0;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Member {
    std::string model;
    std::string callsign;
    TaskSpec task = dummy_task();
    std::vector<std::string> targets = {};
};

inline TeamConfig make_team(const std::string& name, const std::vector<Member>& members,
                            double episode_time = kDefaultEpisodeTime) {
    TeamConfig team;
    team.name = name;
    team.episode_time = episode_time;
    for (const auto& m : members) {
        team.roster.push_back({{m.model, m.callsign}, m.task, ""});
        auto& refs = team.reward_function_targets[m.callsign];
        for (const auto& t : m.targets) refs.push_back(AircraftRef::parse(t));
    }
    return team;
}

/// Initial trim controls of every aircraft, stacked in roster order.
template <typename Runtime>
std::vector<double> trim_actions(const Runtime& runtime) {
    std::vector<double> out;
    for (std::size_t i = 0; i < runtime.size(); ++i) {
        const auto a = runtime.initial_trim(i).controls.as_array();
        out.insert(out.end(), a.begin(), a.end());
    }
    return out;
}

}  // namespace aerogym::testing
