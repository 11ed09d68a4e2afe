#include <aerogym/trajectory.hpp>

#include <aerogym/controllers.hpp>
#include <aerogym/serialization.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <sstream>

namespace aerogym {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw TrajectoryError("malformed_trajectory", what); }

std::array<double, 13> fields(const AircraftState& s) {
    return {s.position_ned.x(), s.position_ned.y(), s.position_ned.z(), s.attitude.x(),
            s.attitude.y(),     s.attitude.z(),     s.body_velocity.x(), s.body_velocity.y(),
            s.body_velocity.z(), s.body_rates.x(),  s.body_rates.y(),   s.body_rates.z(),
            s.sim_time};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

nlohmann::json header_to_json(const TrajectoryHeader& h) {
    return {{"schema_version", h.schema_version},
            {"preset", h.preset},
            {"team", h.team},
            {"callsign", h.callsign},
            {"task", h.task},
            {"task_params", h.task_params},
            {"dt", h.dt},
            {"seed", h.seed},
            {"created", h.created}};
}

TrajectoryHeader header_from_json(const nlohmann::json& j) {
    TrajectoryHeader h;
    try {
        h.schema_version = j.at("schema_version").get<int>();
        if (h.schema_version != kTrajectorySchemaVersion) {
            throw TrajectoryError("unknown_schema_version",
                                  "schema_version " + std::to_string(h.schema_version) + " is not supported");
        }
        h.preset = j.at("preset").get<std::string>();
        h.team = j.at("team").get<std::string>();
        h.callsign = j.at("callsign").get<std::string>();
        h.task = j.at("task").get<std::string>();
        h.task_params = j.at("task_params");
        h.dt = j.at("dt").get<double>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.created = j.at("created").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        malformed(std::string("bad header: ") + e.what());
    }
    return h;
}

nlohmann::json step_to_json(const TrajectoryStep& s) {
    return {{"step_index", s.step_index},
            {"state", state_to_json(s.state)},
            {"action", controls_to_json(s.action)},
            {"reward", s.reward}};
}

TrajectoryStep step_from_json(const nlohmann::json& j) {
    TrajectoryStep s;
    try {
        s.step_index = j.at("step_index").get<std::int64_t>();
        s.state = state_from_json(j.at("state"));
        s.action = controls_from_json(j.at("action"));
        s.reward = j.at("reward").get<double>();
    } catch (const nlohmann::json::exception& e) {
        malformed(std::string("bad step row: ") + e.what());
    }
    return s;
}

std::string format_trajectory(const TrajectoryRecord& record) {
    std::string out = canonical_dump(header_to_json(record.header)) + '\n';
    for (const auto& s : record.steps) out += canonical_dump(step_to_json(s)) + '\n';
    return out;
}

TrajectoryRecord parse_trajectory(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) break;  // torn final line
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.empty()) malformed("missing header line");

    TrajectoryRecord record;
    try {
        record.header = header_from_json(nlohmann::json::parse(lines[0]));
    } catch (const nlohmann::json::parse_error& e) {
        malformed(std::string("unparseable header: ") + e.what());
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error& e) {
            if (i + 1 == lines.size()) break;  // torn final line
            malformed("line " + std::to_string(i + 1) + ": " + e.what());
        }
        TrajectoryStep s = step_from_json(j);
        const auto expect = static_cast<std::int64_t>(record.steps.size());
        if (s.step_index != expect) {
            throw TrajectoryError("out_of_order", "line " + std::to_string(i + 1) + " has step " +
                                                      std::to_string(s.step_index) + ", expected " +
                                                      std::to_string(expect));
        }
        record.steps.push_back(std::move(s));
    }
    return record;
}

TrajectoryRecord read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TrajectoryError("io_error", "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_trajectory(buffer.str());
    } catch (const TrajectoryError& e) {
        throw TrajectoryError(e.code(), path.string() + ": " + e.what());
    }
}

void write_trajectory(const TrajectoryRecord& record, const std::filesystem::path& path) {
    TrajectoryWriter writer(path, record.header);
    for (const auto& s : record.steps) writer.append(s);
    writer.close();
}

std::string trajectory_timestamp() {
    std::time_t t = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, const TrajectoryHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw TrajectoryError("io_error", "cannot open " + path.string() + " for writing");
    out_ << canonical_dump(header_to_json(header)) << '\n' << std::flush;
    if (!out_) throw TrajectoryError("io_error", path.string() + ": header write failed");
}

void TrajectoryWriter::append(const TrajectoryStep& step) {
    if (step.step_index != next_) {
        throw TrajectoryError("out_of_order", path_.string() + ": got step " + std::to_string(step.step_index) +
                                                  ", expected " + std::to_string(next_));
    }
    if (!out_.is_open()) throw TrajectoryError("io_error", path_.string() + ": writer is closed");
    out_ << canonical_dump(step_to_json(step)) << '\n' << std::flush;
    if (!out_) {
        throw TrajectoryError("io_error", path_.string() + ": write failed at step " + std::to_string(step.step_index));
    }
    ++next_;
}

void TrajectoryWriter::close() {
    if (out_.is_open()) out_.close();
}

double ReplayReport::max_abs_divergence() const {
    double m = 0.0;
    for (double d : max_divergence) m = std::max(m, d);
    return m;
}

ReplayReport replay(const TrajectoryRecord& record, const AircraftParams& params) {
    if (record.header.schema_version != kTrajectorySchemaVersion) {
        throw TrajectoryError("unknown_schema_version",
                              "schema_version " + std::to_string(record.header.schema_version));
    }
    if (record.header.preset != params.model_name) {
        throw TrajectoryError("preset_mismatch", "recorded with '" + record.header.preset + "', replaying with '" +
                                                     params.model_name + "'");
    }
    ReplayReport report;
    for (std::size_t t = 0; t + 1 < record.steps.size(); ++t) {
        const TrajectoryStep& row = record.steps[t];
        AircraftState predicted;
        try {
            predicted = step(row.state, row.action, params, record.header.dt);
        } catch (const StallError&) {
            predicted = row.state;
        } catch (const DivergenceError&) {
            predicted = row.state;
        }
        const auto a = fields(predicted);
        const auto b = fields(record.steps[t + 1].state);
        bool equal = true;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (!same_bits(a[k], b[k])) equal = false;
            const double d = std::abs(a[k] - b[k]);
            report.max_divergence[k] = std::max(report.max_divergence[k], std::isnan(d) ? INFINITY : d);
        }
        if (!equal && !report.first_divergent_step) report.first_divergent_step = record.steps[t + 1].step_index;
        ++report.transitions;
    }
    return report;
}

std::vector<std::pair<std::vector<double>, ControlInputs>> export_pairs(const TrajectoryRecord& record) {
    const TaskSpec task = make_task_by_name(record.header.task, record.header.task_params);
    std::vector<std::pair<std::vector<double>, ControlInputs>> out;
    out.reserve(record.steps.size());
    for (const auto& s : record.steps) out.emplace_back(extract_state(s.state, task.state_extractor), s.action);
    return out;
}

TeamRecorder::TeamRecorder(const TeamRuntime& runtime,
                           const std::function<std::filesystem::path(const std::string&)>& path_for,
                           std::string created) {
    const TeamConfig& team = runtime.config();
    for (std::size_t i = 0; i < runtime.size(); ++i) {
        const auto& entry = team.roster[i];
        TrajectoryHeader h;
        h.preset = entry.aircraft.model_name;
        h.team = team.name;
        h.callsign = entry.aircraft.callsign;
        h.task = entry.task.name;
        h.task_params = entry.task.parameters;
        h.dt = runtime.dt();
        h.seed = runtime.episode_seed();
        h.created = created;
        tracks_.push_back({TrajectoryWriter(path_for(entry.aircraft.callsign), h)});
    }
}

void TeamRecorder::capture(const TeamRuntime& runtime) {
    before_ = runtime.states();
    frozen_before_.assign(runtime.size(), false);
    for (std::size_t i = 0; i < runtime.size(); ++i) frozen_before_[i] = runtime.frozen(i);
}

void TeamRecorder::commit(const TeamRuntime& runtime, const StepResult& result) {
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        Track& track = tracks_[i];
        if (track.stopped) continue;
        track.writer.append({step_, before_[i], runtime.actions()[i], result.rewards[i]});
        if (frozen_before_[i]) {
            track.stopped = true;
            track.writer.close();
        }
    }
    ++step_;
    if (result.done) close();
}

void TeamRecorder::close() {
    for (auto& t : tracks_) t.writer.close();
}

std::vector<std::filesystem::path> TeamRecorder::paths() const {
    std::vector<std::filesystem::path> out;
    for (const auto& t : tracks_) out.push_back(t.writer.path());
    return out;
}

}  // namespace aerogym
