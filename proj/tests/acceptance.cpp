// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failures, so ctest fails if any criterion does.

#include <aerogym/central_state.hpp>
#include <aerogym/controllers.hpp>
#include <aerogym/dynamics.hpp>
#include <aerogym/environment.hpp>
#include <aerogym/error.hpp>
#include <aerogym/pilot.hpp>
#include <aerogym/presets.hpp>
#include <aerogym/protocol.hpp>
#include <aerogym/serialization.hpp>
#include <aerogym/state_server.hpp>
#include <aerogym/trajectory.hpp>
#include <aerogym/transport.hpp>

#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace aerogym {
namespace {

namespace fs = std::filesystem;
using testing::make_team;
using testing::uniform;
using Clock = std::chrono::steady_clock;

constexpr double kDegree = std::numbers::pi / 180.0;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

/// Flies one single-aircraft episode under the task's own controller and
/// returns s_0 .. s_T.
struct Flight {
    std::vector<AircraftState> states;
    std::optional<std::string> terminal;
    double wall_seconds = 0.0;
};

Flight fly_task(const std::string& preset, const TaskSpec& task, double seconds, std::uint64_t seed) {
    const auto t0 = Clock::now();
    Environment env(std::make_unique<EmbeddedLink>(), {kDefaultDt, seed});
    env.reset(make_team("solo", {{preset, "one", task}}, seconds));
    TeamPilot pilot(env.runtime());
    Flight f;
    f.states.push_back(env.runtime().states()[0]);
    for (;;) {
        const StepResult r = env.step(pilot.actions(env.runtime()));
        f.states.push_back(env.runtime().states()[0]);
        if (r.done) break;
    }
    f.terminal = env.runtime().terminal_reason(0);
    f.wall_seconds = seconds_since(t0);
    return f;
}

/// Time after which every sample stays inside the band; infinity if the
/// last sample is outside it.
double settle_time(const Flight& f, const std::function<double(const AircraftState&)>& error, double band) {
    double t = f.states.front().sim_time;
    for (const auto& s : f.states) {
        if (!(std::abs(error(s)) < band)) t = std::numeric_limits<double>::infinity();
        else if (std::isinf(t)) t = s.sim_time;
    }
    return t;
}

// ---------------------------------------------------------------------------

Verdict altitude_settling() {
    // Initial altitude pinned so the offsets are exact.
    double worst_settle = 0.0, worst_wall = 0.0;
    std::vector<std::string> failures;
    for (const auto& preset : preset_names()) {
        for (double offset : {-300.0, -100.0, 100.0, 300.0}) {
            const double target = 1000.0 + offset;
            const TaskSpec task = make_task_by_name(
                "reach_static_target_altitude", {{"target", target}, {"initial", {{"altitude", 1000.0}}}});
            const Flight f = fly_task(preset, task, 90.0, 17);
            const double ts = settle_time(f, [&](const AircraftState& s) { return -s.position_ned.z() - target; }, 20.0);
            worst_settle = std::max(worst_settle, ts);
            worst_wall = std::max(worst_wall, f.wall_seconds);
            const bool ok = ts <= 60.0 && f.states.back().sim_time >= 90.0 - 1e-9 && !f.terminal &&
                            f.wall_seconds < 5.0;
            if (!ok) failures.push_back(preset + "@" + num(offset, 0));
        }
    }
    return {failures.empty(), "3 presets x offsets {-300,-100,+100,+300} m; worst settle " + num(worst_settle, 1) +
                                  " s (<= 60), band 20 m held to 90 s; worst runtime " + num(worst_wall) + " s (< 5)" +
                                  (failures.empty() ? "" : "; failed " + failures.front())};
}

Verdict roll_settling() {
    double worst_settle = 0.0;
    std::vector<std::string> failures;
    for (const auto& preset : preset_names()) {
        for (double deg : {-30.0, 15.0, 45.0}) {
            const TaskSpec task = make_task_by_name("reach_static_target_roll", {{"target_deg", deg}});
            const Flight f = fly_task(preset, task, 90.0, 23);
            const double ts =
                settle_time(f, [&](const AircraftState& s) { return s.attitude.x() - deg * kDegree; }, 2.0 * kDegree);
            worst_settle = std::max(worst_settle, ts);
            if (!(ts <= 20.0 && f.states.back().sim_time >= 90.0 - 1e-9 && !f.terminal)) {
                failures.push_back(preset + "@" + num(deg, 0));
            }
        }
    }
    return {failures.empty(), "3 presets x {-30,15,45} deg; worst settle " + num(worst_settle, 1) +
                                  " s (<= 20), 2 deg band held to 90 s" +
                                  (failures.empty() ? "" : "; failed " + failures.front())};
}

// ---------------------------------------------------------------------------
// Online helpers

/// Records every frame the server sends, in global order.
struct WireLog {
    std::mutex mutex;
    std::vector<Message> sent;

    void add(std::string_view body) {
        Message m = decode_message(body);
        std::lock_guard lock(mutex);
        sent.push_back(std::move(m));
    }
};

class TapConnection final : public Connection {
public:
    TapConnection(std::unique_ptr<Connection> inner, std::shared_ptr<WireLog> log)
        : inner_(std::move(inner)), log_(std::move(log)) {}
    void send(std::string_view body) override {
        // Logged before the peer can see it, so the log order is causal.
        log_->add(body);
        inner_->send(body);
    }
    std::optional<std::string> receive() override { return inner_->receive(); }
    void close() override { inner_->close(); }

private:
    std::unique_ptr<Connection> inner_;
    std::shared_ptr<WireLog> log_;
};

class TapListener final : public Listener {
public:
    TapListener(std::unique_ptr<Listener> inner, std::shared_ptr<WireLog> log)
        : inner_(std::move(inner)), log_(std::move(log)) {}
    std::unique_ptr<Connection> accept() override {
        auto c = inner_->accept();
        if (!c) return nullptr;
        return std::make_unique<TapConnection>(std::move(c), log_);
    }
    void close() override { inner_->close(); }

private:
    std::unique_ptr<Listener> inner_;
    std::shared_ptr<WireLog> log_;
};

struct ServerThread {
    StateServer server;
    std::thread thread;

    ServerThread(ServerConfig config, std::unique_ptr<Listener> listener,
                 std::function<void(const CentralState&)> observer = {})
        : server(std::move(config), std::move(listener)) {
        if (observer) server.set_observer(std::move(observer));
        thread = std::thread([this] { server.run(); });
    }
    ~ServerThread() {
        server.stop();
        thread.join();
    }
};

std::unique_ptr<CentralLink> link_to(const std::shared_ptr<InProcessNetwork>& net, const std::string& client) {
    return std::make_unique<RemoteLink>([net, client] { return net->connect(client, "server"); });
}

using Transcript = std::map<std::string, std::vector<std::string>>;

std::vector<TeamConfig> duel_teams() {
    return {make_team("red",
                      {{"f15", "one", make_task_by_name("reach_static_target_altitude", {{"target", 1100.0}}),
                        {"blue/lead"}},
                       {"cessna172p", "two", make_task_by_name("reach_dynamic_target_roll", {})}}),
            make_team("blue", {{"a320", "lead", make_task_by_name("reach_dynamic_target_heading", {}),
                                {"red/one", "red/two"}}})};
}

Transcript run_offline(const std::vector<TeamConfig>& teams, std::uint64_t seed) {
    Transcript out;
    OfflineSimulation sim(teams, {kDefaultDt, seed});
    for (const auto& [name, obs] : sim.reset()) out[name].push_back(canonical_dump(observation_to_json(obs)));
    std::map<std::string, TeamPilot> pilots;
    for (const auto& name : sim.team_names()) pilots.emplace(name, TeamPilot(sim.runtime(name)));
    while (!sim.done()) {
        std::map<std::string, std::vector<double>> actions;
        for (const auto& name : sim.team_names()) actions[name] = pilots.at(name).actions(sim.runtime(name));
        for (const auto& [name, r] : sim.step(actions)) out[name].push_back(canonical_dump(step_result_to_json(r)));
    }
    return out;
}

/// Drives each team's Environment on its own thread until done.
Transcript run_clients(const std::shared_ptr<InProcessNetwork>& net, const std::vector<TeamConfig>& teams,
                       std::uint64_t seed, std::map<std::string, std::vector<Observation>>* observations = nullptr) {
    Transcript out;
    std::mutex mutex;
    std::vector<std::thread> clients;
    std::vector<std::string> errors;
    for (const auto& team : teams) {
        clients.emplace_back([&, team] {
            try {
                Environment env(link_to(net, team.name), {kDefaultDt, seed});
                std::vector<std::string> lines;
                std::vector<Observation> obs{env.reset(team)};
                lines.push_back(canonical_dump(observation_to_json(obs.back())));
                TeamPilot pilot(env.runtime());
                for (;;) {
                    const StepResult r = env.step(pilot.actions(env.runtime()));
                    lines.push_back(canonical_dump(step_result_to_json(r)));
                    obs.push_back(r.observation);
                    if (r.done) break;
                }
                std::lock_guard lock(mutex);
                out[team.name] = std::move(lines);
                if (observations) (*observations)[team.name] = std::move(obs);
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex);
                errors.push_back(team.name + ": " + e.what());
            }
        });
    }
    for (auto& c : clients) c.join();
    if (!errors.empty()) throw std::runtime_error(errors.front());
    return out;
}

// ---------------------------------------------------------------------------

Verdict offline_online_equivalence() {
    const auto teams = duel_teams();
    auto net = InProcessNetwork::create();
    ServerConfig config;
    config.mode = AdmissionMode::k_fixed;
    config.k = 2;
    Transcript online;
    const auto t0 = Clock::now();
    {
        ServerThread server(config, net->listen("server"));
        online = run_clients(net, teams, 99);
    }
    const double wall = seconds_since(t0);
    const Transcript offline = run_offline(teams, 99);
    std::size_t steps = 0;
    bool identical = online == offline;
    for (const auto& [name, lines] : offline) steps = std::max(steps, lines.size() - 1);
    return {identical && steps == 900 && wall < 10.0,
            "2 teams x " + std::to_string(steps) + " steps, StepResults " +
                (identical ? "bit-identical" : "DIFFER") + ", online wall " + num(wall) + " s (< 10)"};
}

Verdict k_fixed_admission() {
    const auto teams = duel_teams();
    auto net = InProcessNetwork::create();
    auto log = std::make_shared<WireLog>();
    ServerConfig config;
    config.mode = AdmissionMode::k_fixed;
    config.k = 2;
    std::string third_error;
    std::size_t accepts_issued = 0;
    {
        ServerThread server(config, std::make_unique<TapListener>(net->listen("server"), log));
        Environment red(link_to(net, "red"), {kDefaultDt, 1});
        Environment blue(link_to(net, "blue"), {kDefaultDt, 1});
        std::thread t([&] { red.reset(teams[0]); });
        blue.reset(teams[1]);
        t.join();
        Environment green(link_to(net, "green"), {kDefaultDt, 1});
        try {
            green.reset(make_team("green", {{"cessna172p", "solo"}}));
        } catch (const EnvironmentError& e) {
            third_error = e.code();
        }
        // Finish the admitted episode so "ever" covers all of it.
        std::thread tr([&] {
            TeamPilot p(red.runtime());
            while (!red.step(p.actions(red.runtime())).done) {
            }
        });
        TeamPilot p(blue.runtime());
        while (!blue.step(p.actions(blue.runtime())).done) {
        }
        tr.join();
        accepts_issued = server.server.core().accepts_issued();
    }
    int accepts = 0, denies = 0, early_states = 0, states = 0;
    for (const auto& m : log->sent) {
        if (m.kind == MessageKind::join_accept) ++accepts;
        if (m.kind == MessageKind::join_deny) ++denies;
        if (m.kind == MessageKind::central_state) {
            ++states;
            if (accepts < 2) ++early_states;
        }
    }
    const bool ok = accepts == 2 && accepts_issued == 2 && denies == 1 && third_error == "simulation_full" &&
                    early_states == 0 && states > 0;
    return {ok, std::to_string(accepts) + " JOIN_ACCEPT, 3rd join -> JOIN_DENY(" + third_error + "), " +
                    std::to_string(early_states) + " CENTRAL_STATE before the 2nd accept (" + std::to_string(states) +
                    " in total)"};
}

/// One 3-team open-mode episode shared by the broadcast and restriction checks.
struct OpenEpisode {
    std::vector<CentralState> history;
    std::shared_ptr<WireLog> log = std::make_shared<WireLog>();
    std::map<std::string, std::vector<Observation>> observations;
};

const OpenEpisode& open_episode() {
    static const OpenEpisode episode = [] {
        OpenEpisode e;
        auto net = InProcessNetwork::create();
        ServerConfig config;
        config.mode = AdmissionMode::open;
        config.auto_start = 3;
        const std::vector<TeamConfig> teams{
            make_team("red", {{"f15", "one", make_task_by_name("reach_dynamic_target_altitude", {})},
                              {"f15", "two", make_task_by_name("reach_static_target_roll", {{"target_deg", -20}})}},
                      60.0),
            make_team("blue", {{"a320", "lead", make_task_by_name("reach_dynamic_target_heading", {})}}, 60.0),
            make_team("green", {{"cessna172p", "solo", make_task_by_name("level_flight", {})}}, 60.0)};
        ServerThread server(config, std::make_unique<TapListener>(net->listen("server"), e.log),
                            [&e](const CentralState& s) { e.history.push_back(s); });
        run_clients(net, teams, 31, &e.observations);
        return e;
    }();
    return episode;
}

nlohmann::json expected_opponents(const CentralState& state, const std::string& team) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [id, full] : state.entries) {
        if (id.team == team) continue;
        rows.push_back({{"team", id.team}, {"callsign", id.callsign}, {"pose", restrict_opponent_state(full)}});
    }
    return rows;
}

Verdict broadcast_consistency() {
    const OpenEpisode& e = open_episode();
    std::size_t compared = 0, mismatches = 0;
    std::set<std::string> teams;
    for (const auto& m : e.log->sent) {
        if (m.kind != MessageKind::central_state) continue;
        teams.insert(m.team_name);
        const auto t = static_cast<std::size_t>(m.step_index);
        if (t >= e.history.size() || e.history[t].step_index != m.step_index) {
            ++mismatches;
            continue;
        }
        ++compared;
        if (canonical_dump(m.payload.at("opponents")) != canonical_dump(expected_opponents(e.history[t], m.team_name))) {
            ++mismatches;
        }
    }
    // The observation each client built from those messages agrees too.
    for (const auto& [team, obs] : e.observations) {
        for (std::size_t t = 0; t < obs.size(); ++t) {
            nlohmann::json got = nlohmann::json::array();
            for (Eigen::Index r = 0; r < obs[t].opponent_states.rows(); ++r) {
                const auto& id = obs[t].opponent_ids[static_cast<std::size_t>(r)];
                Pose p{};
                for (int c = 0; c < 6; ++c) p[static_cast<std::size_t>(c)] = obs[t].opponent_states(r, c);
                got.push_back({{"team", id.team}, {"callsign", id.callsign}, {"pose", p}});
            }
            if (t >= e.history.size() || canonical_dump(got) != canonical_dump(expected_opponents(e.history[t], team))) {
                ++mismatches;
            }
        }
    }
    const bool ok = teams.size() == 3 && e.history.size() == 601 && compared == 3 * e.history.size() && mismatches == 0;
    return {ok, "3 teams x " + std::to_string(e.history.size()) + " steps, " + std::to_string(compared) +
                    " CENTRAL_STATE messages compared bytewise, " + std::to_string(mismatches) + " mismatches"};
}

void collect_keys(const nlohmann::json& j, std::set<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            out.insert(k);
            collect_keys(v, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_keys(v, out);
    }
}

Verdict opponent_restriction() {
    const OpenEpisode& e = open_episode();
    static_assert(OpponentMatrix::ColsAtCompileTime == 6);
    std::size_t observations = 0, bad = 0;
    for (const auto& [team, obs] : e.observations) {
        for (const auto& o : obs) {
            ++observations;
            if (o.opponent_states.cols() != 6 || o.opponent_states.rows() != (team == "red" ? 2 : 3)) ++bad;
            const auto j = observation_to_json(o);
            for (const auto& row : j.at("opponent_states")) {
                if (row.size() != 6) ++bad;
            }
        }
    }
    // Nothing velocity-like crosses the wire in a CENTRAL_STATE either.
    const std::set<std::string> forbidden{"body_velocity", "body_rates", "u", "v", "w", "p", "q", "r", "airspeed"};
    std::size_t leaks = 0;
    for (const auto& m : e.log->sent) {
        if (m.kind != MessageKind::central_state) continue;
        std::set<std::string> keys;
        collect_keys(m.payload, keys);
        for (const auto& k : keys) leaks += forbidden.count(k);
        for (const auto& row : m.payload.at("opponents")) {
            if (row.at("pose").size() != 6) ++bad;
        }
    }
    return {bad == 0 && leaks == 0 && observations > 0,
            std::to_string(observations) + " observations with 6-column opponent rows, " + std::to_string(bad) +
                " shape violations, " + std::to_string(leaks) + " velocity/rate fields on the wire"};
}

Verdict episode_budget() {
    Environment env(std::make_unique<EmbeddedLink>(), {0.1, 5});
    env.reset(make_team("solo", {{"cessna172p", "one", make_task_by_name("level_flight", {})}}, 90.0));
    TeamPilot pilot(env.runtime());
    std::int64_t done_at = -1;
    for (std::int64_t t = 1; t <= 2000; ++t) {
        if (env.step(pilot.actions(env.runtime())).done) {
            done_at = t;
            break;
        }
    }
    const bool single_ok = done_at == 900 && !env.runtime().terminal_reason(0);

    OfflineSimulation sim({make_team("long", {{"f15", "one", make_task_by_name("level_flight", {})}}, 90.0),
                           make_team("short", {{"a320", "one", make_task_by_name("level_flight", {})}}, 60.0)},
                          {0.1, 5});
    sim.reset();
    std::map<std::string, TeamPilot> pilots;
    for (const auto& n : sim.team_names()) pilots.emplace(n, TeamPilot(sim.runtime(n)));
    std::int64_t sim_end = -1;
    bool both_done = false;
    for (std::int64_t t = 1; t <= 2000 && !sim.done(); ++t) {
        std::map<std::string, std::vector<double>> actions;
        for (const auto& n : sim.team_names()) actions[n] = pilots.at(n).actions(sim.runtime(n));
        const auto results = sim.step(actions);
        if (sim.done()) {
            sim_end = t;
            both_done = results.at("long").done && results.at("short").done;
        }
    }
    const bool pair_ok = sim_end >= 0 && sim_end <= 600 && both_done;
    return {single_ok && pair_ok, "90 s at dt 0.1: done at step " + std::to_string(done_at) +
                                      " (900); teams at 90 s and 60 s: simulation ends at step " +
                                      std::to_string(sim_end) + " (<= 600)"};
}

// ---------------------------------------------------------------------------

double awkward(std::mt19937_64& rng) {
    switch (std::uniform_int_distribution<int>(0, 7)(rng)) {
        case 0: return -0.0;
        case 1: return std::numeric_limits<double>::denorm_min() * std::uniform_int_distribution<int>(1, 1000)(rng);
        case 2: return std::uniform_real_distribution<double>(-1e300, 1e300)(rng);
        case 3: return 0.1 + 0.2;
        case 4: return std::nextafter(1.0, 2.0);
        default: return uniform(rng, -1e4, 1e4);
    }
}

TrajectoryRecord random_record(std::mt19937_64& rng) {
    TrajectoryRecord r;
    const auto presets = preset_names();
    r.header.preset = presets[rng() % presets.size()];
    r.header.team = "team" + std::to_string(rng() % 100);
    r.header.callsign = "cs-" + std::to_string(rng() % 1000);
    r.header.task = "reach_static_target_roll";
    r.header.task_params = {{"target", awkward(rng)}};
    r.header.dt = uniform(rng, 1e-3, 0.5);
    r.header.seed = rng();
    r.header.created = "2026-01-01T00:00:00Z";
    const int n = std::uniform_int_distribution<int>(0, 40)(rng);
    for (int i = 0; i < n; ++i) {
        TrajectoryStep s;
        s.step_index = i;
        s.state.position_ned = Vec3(awkward(rng), awkward(rng), awkward(rng));
        s.state.attitude = Vec3(awkward(rng), awkward(rng), awkward(rng));
        s.state.body_velocity = Vec3(awkward(rng), awkward(rng), awkward(rng));
        s.state.body_rates = Vec3(awkward(rng), awkward(rng), awkward(rng));
        s.state.sim_time = awkward(rng);
        s.action = ControlInputs::clamped(uniform(rng, -1, 1), uniform(rng, -1, 1), -0.0, uniform(rng, 0, 1));
        s.reward = awkward(rng);
        r.steps.push_back(s);
    }
    return r;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool bit_equal(const TrajectoryRecord& a, const TrajectoryRecord& b) {
    if (canonical_dump(a.header.task_params) != canonical_dump(b.header.task_params)) return false;
    if (a.header.preset != b.header.preset || a.header.team != b.header.team ||
        a.header.callsign != b.header.callsign || a.header.seed != b.header.seed ||
        !same_bits(a.header.dt, b.header.dt) || a.steps.size() != b.steps.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const auto& x = a.steps[i];
        const auto& y = b.steps[i];
        const auto fx = testing::flatten(x.state), fy = testing::flatten(y.state);
        for (std::size_t k = 0; k < fx.size(); ++k) {
            if (!same_bits(fx[k], fy[k])) return false;
        }
        const auto ax = x.action.as_array(), ay = y.action.as_array();
        for (std::size_t k = 0; k < 4; ++k) {
            if (!same_bits(ax[k], ay[k])) return false;
        }
        if (!same_bits(x.reward, y.reward) || x.step_index != y.step_index) return false;
    }
    return true;
}

Verdict trajectory_roundtrip_replay() {
    const fs::path dir = fs::temp_directory_path() / "aerogym_acceptance_traj";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 rng(4242);
    int roundtrips = 0;
    for (int i = 0; i < 100; ++i) {
        const TrajectoryRecord r = random_record(rng);
        write_trajectory(r, dir / "random.traj");
        if (bit_equal(r, read_trajectory(dir / "random.traj"))) ++roundtrips;
    }

    // Every controller task on every preset, recorded through the environment.
    int recorded = 0, clean = 0, detected = 0, perturbed = 0;
    for (const auto& preset : preset_names()) {
        for (const auto& task_name : task_names()) {
            if (task_name == "dummy") continue;
            const AircraftParams params_p = load_preset(preset);
            const double lo = params_p.min_trim_airspeed(), hi = params_p.max_trim_airspeed();
            // Targets each preset can reach.
            const std::map<std::string, nlohmann::json> params_for{
                {"reach_static_target_altitude", {{"target", 1100.0}}},
                {"reach_static_target_roll", {{"target", 0.3}}},
                {"reach_static_target_pitch", {{"target", 0.05}}},
                {"reach_static_target_heading", {{"target", 0.5}}},
                {"reach_static_target_airspeed", {{"target", cruise_airspeed(params_p) + 5.0}}},
                {"reach_dynamic_target_airspeed", {{"envelope", {lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)}}}},
            };
            const auto found = params_for.find(task_name);
            const nlohmann::json params = found == params_for.end() ? nlohmann::json::object() : found->second;
            Environment env(std::make_unique<EmbeddedLink>(), {kDefaultDt, 77});
            env.reset(make_team("rec", {{preset, "one", make_task_by_name(task_name, params)}}, 90.0));
            TeamPilot pilot(env.runtime());
            const fs::path path = dir / (preset + "_" + task_name + ".traj");
            TeamRecorder recorder(env.runtime(), [&](const std::string&) { return path; }, "2026-01-01T00:00:00Z");
            for (;;) {
                const auto a = pilot.actions(env.runtime());
                recorder.capture(env.runtime());
                const StepResult r = env.step(a);
                recorder.commit(env.runtime(), r);
                if (r.done) break;
            }
            recorder.close();
            TrajectoryRecord record = read_trajectory(path);
            ++recorded;
            if (replay(record, params_p).passed()) ++clean;

            if (record.steps.size() < 2) continue;
            const auto k = static_cast<std::size_t>(rng() % (record.steps.size() - 1));
            auto a = record.steps[k].action.as_array();
            a[1] += a[1] > 0.0 ? -1e-6 : 1e-6;
            record.steps[k].action = ControlInputs::clamped(a[0], a[1], a[2], a[3]);
            ++perturbed;
            const ReplayReport report = replay(record, params_p);
            if (report.first_divergent_step && *report.first_divergent_step == record.steps[k + 1].step_index) {
                ++detected;
            }
        }
    }
    fs::remove_all(dir);
    const bool ok = roundtrips == 100 && recorded > 0 && clean == recorded && detected == perturbed;
    return {ok, std::to_string(roundtrips) + "/100 random records bit-exact; " + std::to_string(clean) + "/" +
                    std::to_string(recorded) + " controller episodes replay with zero divergence; " +
                    std::to_string(detected) + "/" + std::to_string(perturbed) +
                    " perturbed actions caught at the next step"};
}

// ---------------------------------------------------------------------------

Verdict dynamics_properties() {
    // Symmetric subspace closure.
    std::mt19937_64 rng(1000);
    const auto presets = preset_names();
    int closed = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const AircraftParams p = load_preset(presets[static_cast<std::size_t>(trial) % presets.size()]);
        AircraftState s;
        s.position_ned = Vec3(uniform(rng, -5e3, 5e3), uniform(rng, -5e3, 5e3), -uniform(rng, 200, 6000));
        s.attitude = Vec3(0.0, uniform(rng, -0.4, 0.4), uniform(rng, -std::numbers::pi, std::numbers::pi));
        const double speed = uniform(rng, p.min_trim_airspeed(), p.max_trim_airspeed());
        const double alpha = uniform(rng, -0.1, 0.2);
        s.body_velocity = Vec3(speed * std::cos(alpha), 0.0, speed * std::sin(alpha));
        s.body_rates = Vec3(0.0, uniform(rng, -0.2, 0.2), 0.0);
        const ControlInputs c = ControlInputs::clamped(0.0, uniform(rng, -1, 1), 0.0, uniform(rng, 0, 1));
        bool ok = false;
        try {
            // Closure of the vector field: no lateral rate at a symmetric
            // state, and one full RK4 step stays exactly in the subspace.
            const auto d = derivatives(s, c, p).components();
            const AircraftState n = step(s, c, p, 0.1);
            ok = d[3] == 0.0 && d[5] == 0.0 && d[7] == 0.0 && d[9] == 0.0 && d[11] == 0.0 &&
                 n.body_velocity.y() == 0.0 && n.body_rates.x() == 0.0 && n.body_rates.z() == 0.0 &&
                 n.attitude.x() == 0.0;
        } catch (const Error&) {
        }
        if (ok) ++closed;
    }

    // RK4 order by self-convergence: e(h) = |y_h - y_{h/2}| shrinks 16x per
    // halving for a fourth-order method; >= 8 is required.
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (const auto& name : presets) {
        const AircraftParams p = load_preset(name);
        const TrimResult t = trim(p, cruise_airspeed(p), 1000.0);
        const ControlInputs c = ControlInputs::clamped(0.3, t.controls.elevator() + 0.2, 0.2, 1.0);
        const auto integrate = [&](double h, int n) {
            AircraftState s = t.state;
            for (int i = 0; i < n; ++i) s = step(s, c, p, h);
            return s;
        };
        const auto diff = [](const AircraftState& a, const AircraftState& b) {
            const auto fa = testing::flatten(a), fb = testing::flatten(b);
            double worst = 0.0;
            for (std::size_t i = 0; i < 12; ++i) worst = std::max(worst, std::abs(fa[i] - fb[i]));
            return worst;
        };
        const AircraftState y1 = integrate(0.2, 5), y2 = integrate(0.1, 10), y3 = integrate(0.05, 20);
        worst_ratio = std::min(worst_ratio, diff(y1, y2) / diff(y2, y3));
    }

    // Trim residual: every derivative component except the horizontal
    // position rates (the cruise ground velocity).
    double worst_residual = 0.0;
    int trims = 0;
    for (const auto& name : presets) {
        const AircraftParams p = load_preset(name);
        const double lo = p.min_trim_airspeed(), hi = p.max_trim_airspeed();
        for (const auto& [v, h] : {std::pair{lo, 0.0}, std::pair{0.5 * (lo + hi), 1500.0}, std::pair{hi, 4000.0}}) {
            const TrimResult t = trim(p, v, h);
            const auto comps = derivatives(t.state, t.controls, p).components();
            for (std::size_t i = 2; i < comps.size(); ++i) worst_residual = std::max(worst_residual, std::abs(comps[i]));
            ++trims;
        }
    }
    const bool ok = closed == 1000 && worst_ratio >= 8.0 && trims == 9 && worst_residual < 1e-6;
    std::ostringstream d;
    d << closed << "/1000 symmetric states stay symmetric; RK4 error ratio min " << num(worst_ratio, 2)
      << " (>= 8); trim residual max " << worst_residual << " over " << trims << " trims (< 1e-6)";
    return {ok, d.str()};
}

}  // namespace
}  // namespace aerogym

int main() {
    using namespace aerogym;
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"altitude_hold_settling", altitude_settling},
        {"roll_hold_settling", roll_settling},
        {"offline_online_equivalence", offline_online_equivalence},
        {"k_fixed_admission", k_fixed_admission},
        {"broadcast_consistency", broadcast_consistency},
        {"opponent_restriction", opponent_restriction},
        {"episode_budget", episode_budget},
        {"trajectory_roundtrip_replay", trajectory_roundtrip_replay},
        {"dynamics_properties", dynamics_properties},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failures;
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures;
}
