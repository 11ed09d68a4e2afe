#pragma once

// Episode recordings (.traj). A file is one canonical JSON header line
// followed by one canonical JSON line per step; row t holds the state s_t,
// the action a_t applied to it, and the reward received for that step.
// Lines are flushed as they are written, so a crash leaves a valid prefix.

#include <aerogym/dynamics.hpp>
#include <aerogym/environment.hpp>
#include <aerogym/error.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aerogym {

inline constexpr int kTrajectorySchemaVersion = 1;

// TrajectoryError codes: out_of_order, io_error, unknown_schema_version,
// preset_mismatch, malformed_trajectory.

struct TrajectoryHeader {
    int schema_version = kTrajectorySchemaVersion;
    std::string preset;
    std::string team;
    std::string callsign;
    std::string task;
    nlohmann::json task_params = nlohmann::json::object();
    double dt = kDefaultDt;
    std::uint64_t seed = 0;  // episode seed
    std::string created;     // ISO 8601 UTC

    friend bool operator==(const TrajectoryHeader&, const TrajectoryHeader&) = default;
};

struct TrajectoryStep {
    std::int64_t step_index = 0;
    AircraftState state;
    ControlInputs action;
    double reward = 0.0;

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct TrajectoryRecord {
    TrajectoryHeader header;
    std::vector<TrajectoryStep> steps;

    friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

nlohmann::json header_to_json(const TrajectoryHeader& header);
TrajectoryHeader header_from_json(const nlohmann::json& j);
nlohmann::json step_to_json(const TrajectoryStep& step);
TrajectoryStep step_from_json(const nlohmann::json& j);

/// Whole-file text form.
std::string format_trajectory(const TrajectoryRecord& record);
/// Inverse of format_trajectory. An incomplete last line (no newline, or
/// not parseable) is dropped as a torn write.
TrajectoryRecord parse_trajectory(std::string_view text);

TrajectoryRecord read_trajectory(const std::filesystem::path& path);
void write_trajectory(const TrajectoryRecord& record, const std::filesystem::path& path);

/// Current UTC time; SOURCE_DATE_EPOCH wins when set so recordings can be
/// reproduced byte for byte.
std::string trajectory_timestamp();

/// Append-only writer; every line is flushed before append returns.
class TrajectoryWriter {
public:
    TrajectoryWriter(const std::filesystem::path& path, const TrajectoryHeader& header);

    /// Throws TrajectoryError("out_of_order") unless step_index is the next
    /// one, and ("io_error") naming the path and step on write failure.
    void append(const TrajectoryStep& step);
    void close();

    const std::filesystem::path& path() const { return path_; }
    std::int64_t steps_written() const { return next_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::int64_t next_ = 0;
};

struct ReplayReport {
    std::size_t transitions = 0;  // recorded transitions re-simulated
    std::optional<std::int64_t> first_divergent_step;
    /// Largest absolute difference per AircraftState field, in the order
    /// north, east, down, roll, pitch, yaw, u, v, w, p, q, r, sim_time.
    std::array<double, 13> max_divergence{};

    bool passed() const { return !first_divergent_step; }
    double max_abs_divergence() const;
};

/// Re-runs dynamics from each recorded state with its recorded action and
/// compares bit for bit with the next recorded state. A dynamics error
/// holds the state, as the environment does.
/// Throws TrajectoryError("preset_mismatch") or ("unknown_schema_version").
ReplayReport replay(const TrajectoryRecord& record, const AircraftParams& params);

/// (extracted state, action) per step, using the header's task extractor.
/// Throws ConfigError("unknown_task").
std::vector<std::pair<std::vector<double>, ControlInputs>> export_pairs(const TrajectoryRecord& record);

/// Records every aircraft of a team to its own file. An aircraft's file
/// ends with its first frozen row.
class TeamRecorder {
public:
    /// `path_for(callsign)` names each aircraft's file.
    TeamRecorder(const TeamRuntime& runtime,
                 const std::function<std::filesystem::path(const std::string&)>& path_for,
                 std::string created = trajectory_timestamp());

    /// Call before Environment::step with the runtime as it is then.
    void capture(const TeamRuntime& runtime);
    /// Call with the result of that step.
    void commit(const TeamRuntime& runtime, const StepResult& result);
    void close();

    std::vector<std::filesystem::path> paths() const;

private:
    struct Track {
        TrajectoryWriter writer;
        bool stopped = false;
    };
    std::vector<Track> tracks_;
    std::vector<AircraftState> before_;
    std::vector<bool> frozen_before_;
    std::int64_t step_ = 0;
};

}  // namespace aerogym
