#pragma once

// Per-episode signal extraction from recordings, with CSV and SVG output.
// Each episode contributes a control signal, a target signal (the tracked
// value against its target, when the task declares one) and a reward signal.

#include <aerogym/trajectory.hpp>

#include <string>
#include <vector>

namespace aerogym {

struct EpisodeSignals {
    std::string label;           // team/callsign
    std::string task;
    std::string control_channel; // aileron, elevator, rudder or throttle
    std::string tracked_field;   // empty when the task has no target
    bool has_target = false;
    std::vector<std::int64_t> step;
    std::vector<double> time;
    std::vector<double> control;
    std::vector<double> tracked;
    std::vector<double> target;
    std::vector<double> reward;
};

/// Row t pairs s_t with a_t, the target at s_t's time and r_{t+1}.
/// Targets come from the task's schedule keyed by the recorded seed.
EpisodeSignals extract_signals(const TrajectoryRecord& record);

/// One header row then one row per step per episode. The tracked and
/// target columns are left out when no episode has a target, and left
/// empty for the episodes without one.
std::string signals_csv(const std::vector<EpisodeSignals>& episodes);

/// Grid of line charts: one row per episode, one column per signal
/// (control, target, reward; two columns plus a note without targets).
std::string signals_svg(const std::vector<EpisodeSignals>& episodes);

/// Number of signal columns the figure uses.
int signal_columns(const std::vector<EpisodeSignals>& episodes);

}  // namespace aerogym
