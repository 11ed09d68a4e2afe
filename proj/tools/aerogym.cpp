// Command-line entry points: offline runs, the state server and its team
// client, the manual cockpit bridge, replay and plotting.

#include <aerogym/bridge.hpp>
#include <aerogym/environment.hpp>
#include <aerogym/error.hpp>
#include <aerogym/pilot.hpp>
#include <aerogym/plot.hpp>
#include <aerogym/presets.hpp>
#include <aerogym/state_server.hpp>
#include <aerogym/team_file.hpp>
#include <aerogym/trajectory.hpp>
#include <aerogym/transport.hpp>

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace aerogym;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    double dt = kDefaultDt;
    std::string record;
};

void say(const std::string& line) {
    std::cout << line << '\n' << std::flush;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// Record paths are <dir>/<team>_<callsign>.traj, with an episode suffix
/// when more than one episode is flown.
std::function<fs::path(const std::string&)> record_paths(const std::string& dir, const std::string& team,
                                                          int episode, int episodes) {
    return [=](const std::string& callsign) {
        std::string name = team + "_" + callsign;
        if (episodes > 1) name += "_e" + std::to_string(episode);
        return fs::path(dir) / (name + ".traj");
    };
}

void make_record_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw TrajectoryError("io_error", "cannot create record directory '" + dir + "': " + ec.message());
}

void print_totals(const std::string& prefix, const TeamRuntime& rt, const std::vector<double>& totals) {
    for (std::size_t i = 0; i < rt.size(); ++i) {
        const auto& reason = rt.terminal_reason(i);
        say(prefix + rt.config().name + "/" + rt.config().roster[i].aircraft.callsign + " reward " +
            fmt(totals[i]) + " terminal " + (reason ? *reason : "none"));
    }
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::vector<std::string> team_files;
    int episodes = 1;
};

int cmd_run(const Globals& g, const RunArgs& args) {
    std::vector<TeamConfig> teams;
    for (const auto& path : args.team_files) teams.push_back(load_team_file(path));
    if (!g.record.empty()) make_record_dir(g.record);
    OfflineSimulation sim(teams, {g.dt, g.seed});
    for (int e = 0; e < args.episodes; ++e) {
        sim.reset();
        const auto names = sim.team_names();
        std::map<std::string, TeamPilot> pilots;
        std::map<std::string, std::unique_ptr<TeamRecorder>> recorders;
        std::map<std::string, std::vector<double>> totals;
        for (const auto& name : names) {
            const TeamRuntime& rt = sim.runtime(name);
            pilots.emplace(name, TeamPilot(rt));
            totals[name].assign(rt.size(), 0.0);
            if (!g.record.empty()) {
                recorders[name] = std::make_unique<TeamRecorder>(rt, record_paths(g.record, name, e, args.episodes));
            }
        }
        std::int64_t steps = 0;
        while (!sim.done()) {
            std::map<std::string, std::vector<double>> actions;
            for (const auto& name : names) {
                actions[name] = pilots.at(name).actions(sim.runtime(name));
                if (auto it = recorders.find(name); it != recorders.end()) it->second->capture(sim.runtime(name));
            }
            const auto results = sim.step(actions);
            ++steps;
            for (const auto& [name, r] : results) {
                if (auto it = recorders.find(name); it != recorders.end()) it->second->commit(sim.runtime(name), r);
                for (std::size_t i = 0; i < r.rewards.size(); ++i) totals[name][i] += r.rewards[i];
            }
        }
        say("episode " + std::to_string(e) + " steps " + std::to_string(steps));
        for (const auto& name : names) print_totals("  ", sim.runtime(name), totals[name]);
        for (auto& [name, rec] : recorders) {
            rec->close();
            for (const auto& p : rec->paths()) say("  recorded " + p.string());
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    std::string mode = "k-fixed";
    int k = 2;
    std::string listen = "127.0.0.1:7700";
    std::optional<int> start;
    double step_timeout = 30.0;
    std::optional<int> episodes;
    bool quiet = false;
};

int cmd_serve(const Globals& g, const ServeArgs& args) {
    ServerConfig config;
    const auto mode = admission_mode_from_string(args.mode);
    if (!mode) throw ConfigError("invalid_mode", "mode must be k-fixed or open, got '" + args.mode + "'");
    config.mode = *mode;
    config.k = args.k;
    config.dt = g.dt;
    config.listen_address = args.listen;
    config.step_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(args.step_timeout * 1000.0));
    config.auto_start = args.start;
    config.max_episodes = args.episodes;
    if (args.start && config.mode != AdmissionMode::open) {
        throw ConfigError("invalid_start", "--start applies to open mode only");
    }
    validate(config);

    auto listener = std::make_unique<TcpListener>(parse_host_port(args.listen));
    const auto address = parse_host_port(args.listen);
    const std::uint16_t port = listener->port();
    // Shared so the detached stdin reader can never outlive it.
    auto owned = std::make_shared<StateServer>(config, std::move(listener));
    StateServer& server = *owned;
    server.set_logger([quiet = args.quiet](const std::string& line) {
        if (!quiet || !line.starts_with("step ")) say(line);
    });
    say("listening on " + address.host + ":" + std::to_string(port) + " mode " + args.mode);

    // SIGINT and SIGTERM stop the server from a dedicated thread; the mask
    // is set before any server thread exists so they all inherit it.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread signal_thread([&server, &signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });

    if (config.mode == AdmissionMode::open) {
        // A "start" line on stdin starts the episode with whoever has joined.
        std::thread([owned] {
            std::string line;
            while (std::getline(std::cin, line)) {
                if (line == "start") owned->request_start();
            }
        }).detach();
    }
    server.run();
    pthread_kill(signal_thread.native_handle(), SIGTERM);
    signal_thread.join();
    say("served " + std::to_string(server.core().episodes_completed()) + " episode(s)");
    return 0;
}

// ---------------------------------------------------------------------------

struct JoinArgs {
    std::string team_file;
    std::string connect = "127.0.0.1:7700";
    bool quiet = false;
};

int cmd_join(const Globals& g, const JoinArgs& args) {
    const TeamConfig team = load_team_file(args.team_file);
    const HostPort address = parse_host_port(args.connect);
    if (!g.record.empty()) make_record_dir(g.record);
    Environment env(std::make_unique<RemoteLink>([address] { return tcp_connect(address); }), {g.dt, g.seed});
    env.reset(team);
    const TeamRuntime& rt = env.runtime();
    say("joined " + args.connect + " as " + team.name + " dt " + fmt(rt.dt()));
    TeamPilot pilot(rt);
    std::unique_ptr<TeamRecorder> recorder;
    if (!g.record.empty()) recorder = std::make_unique<TeamRecorder>(rt, record_paths(g.record, team.name, 0, 1));
    std::vector<double> totals(rt.size(), 0.0);
    for (;;) {
        const auto actions = pilot.actions(rt);
        if (recorder) recorder->capture(rt);
        const StepResult r = env.step(actions);
        if (recorder) recorder->commit(rt, r);
        for (std::size_t i = 0; i < r.rewards.size(); ++i) totals[i] += r.rewards[i];
        if (!args.quiet) say("step " + std::to_string(rt.step_index()));
        if (r.done) break;
    }
    say("episode over at step " + std::to_string(rt.step_index()));
    print_totals("  ", rt, totals);
    if (recorder) {
        recorder->close();
        for (const auto& p : recorder->paths()) say("  recorded " + p.string());
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct FlyArgs {
    std::string team_file;
    std::string listen = "127.0.0.1:" + std::to_string(kDefaultBridgePort);
    double connect_timeout = 60.0;
    double pace = 1.0;
};

int cmd_fly(const Globals& g, const FlyArgs& args) {
    const TeamConfig team = load_team_file(args.team_file);
    const HostPort address = parse_host_port(args.listen);
    if (!g.record.empty()) make_record_dir(g.record);
    Environment env(std::make_unique<EmbeddedLink>(), {g.dt, g.seed});
    env.reset(team);
    TeamPilot pilot(env.runtime());
    if (pilot.manual_indices().size() != 1) {
        throw ConfigError("manual_aircraft", "fly needs exactly one roster aircraft with controller 'manual'");
    }
    CockpitBridge bridge(address.host, address.port);
    const std::string url = "ws://" + address.host + ":" + std::to_string(bridge.port());
    say("cockpit bridge on " + url + ", waiting up to " + fmt(args.connect_timeout) + " s");
    if (!bridge.wait_for_cockpit(std::chrono::milliseconds(static_cast<std::int64_t>(args.connect_timeout * 1000)))) {
        throw TransportError("no_cockpit", "no cockpit connected within " + fmt(args.connect_timeout) +
                                               " s; open the cockpit and point it at " + url);
    }
    say("cockpit connected");
    std::unique_ptr<TeamRecorder> recorder;
    if (!g.record.empty()) {
        recorder = std::make_unique<TeamRecorder>(env.runtime(), record_paths(g.record, team.name, 0, 1));
    }
    FlyOptions options;
    options.pace = args.pace;
    if (recorder) {
        options.before_step = [&](const TeamRuntime& rt) { recorder->capture(rt); };
        options.after_step = [&](const TeamRuntime& rt, const StepResult& r) { recorder->commit(rt, r); };
    }
    const FlySummary s = fly_episode(env, pilot, bridge, options);
    say("episode over at step " + std::to_string(s.steps) + " reward " + fmt(s.total_reward) + " terminal " +
        (s.terminal ? *s.terminal : "none") + " malformed_frames " + std::to_string(s.malformed_frames));
    if (recorder) {
        recorder->close();
        for (const auto& p : recorder->paths()) say("  recorded " + p.string());
    }
    bridge.close();
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_replay(const std::vector<std::string>& files) {
    int status = 0;
    for (const auto& path : files) {
        const TrajectoryRecord record = read_trajectory(path);
        const ReplayReport report = replay(record, load_preset(record.header.preset));
        if (report.passed()) {
            say(path + ": divergence 0 over " + std::to_string(report.transitions) + " transitions");
        } else {
            say(path + ": divergence at step " + std::to_string(*report.first_divergent_step) + " max " +
                std::to_string(report.max_abs_divergence()));
            status = 1;
        }
    }
    return status;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out) {
    std::vector<EpisodeSignals> episodes;
    for (const auto& path : files) episodes.push_back(extract_signals(read_trajectory(path)));
    const int cols = signal_columns(episodes);
    const auto write = [](const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        f << text;
        if (!f) throw TrajectoryError("io_error", "cannot write '" + path + "'");
    };
    const fs::path prefix(out);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    write(out + ".csv", signals_csv(episodes));
    write(out + ".svg", signals_svg(episodes));
    say("wrote " + out + ".csv and " + out + ".svg: " + std::to_string(episodes.size()) + " episode(s) x " +
        std::to_string(cols) + " signals");
    if (cols == 2) say("note: no task here declares a target, so the target column is left out");
    return 0;
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent fixed-wing flight gym"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for initial conditions and dynamic targets");
    app.add_option("--dt", g.dt, "Step size in seconds, (0, 0.5]");
    app.add_option("--record", g.record, "Directory for .traj recordings");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Fly an offline episode with one or more team files");
    run_cmd->add_option("teams", run.team_files, "Team files")->required();
    run_cmd->add_option("--episodes", run.episodes, "Episodes to fly")->check(CLI::PositiveNumber);

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the central state server");
    serve_cmd->add_option("--mode", serve.mode, "k-fixed or open");
    serve_cmd->add_option("--k", serve.k, "Teams per episode in k-fixed mode");
    serve_cmd->add_option("--listen", serve.listen, "HOST:PORT (port 0 picks one)");
    serve_cmd->add_option("--start", serve.start, "Open mode: start once this many teams joined");
    serve_cmd->add_option("--step-timeout", serve.step_timeout, "Seconds to wait for every team's report");
    serve_cmd->add_option("--episodes", serve.episodes, "k-fixed mode: exit after this many episodes");
    serve_cmd->add_flag("--quiet", serve.quiet, "Do not log every step");

    JoinArgs join;
    auto* join_cmd = app.add_subcommand("join", "Join a server with a team file");
    join_cmd->add_option("team", join.team_file, "Team file")->required();
    join_cmd->add_option("--connect", join.connect, "Server HOST:PORT");
    join_cmd->add_flag("--quiet", join.quiet, "Do not log every step");

    FlyArgs fly;
    auto* fly_cmd = app.add_subcommand("fly", "Fly a manual aircraft from the cockpit");
    fly_cmd->add_option("team", fly.team_file, "Team file with one manual aircraft")->required();
    fly_cmd->add_option("--listen", fly.listen, "Bridge HOST:PORT");
    fly_cmd->add_option("--connect-timeout", fly.connect_timeout, "Seconds to wait for a cockpit");
    fly_cmd->add_option("--pace", fly.pace, "Wall seconds per simulated second; 0 runs unpaced");

    std::vector<std::string> replay_files;
    auto* replay_cmd = app.add_subcommand("replay", "Re-simulate recordings and report divergence");
    replay_cmd->add_option("files", replay_files, ".traj files")->required();

    std::vector<std::string> plot_files;
    std::string plot_out = "plot";
    auto* plot_cmd = app.add_subcommand("plot", "Write CSV and SVG signal plots for recordings");
    plot_cmd->add_option("files", plot_files, ".traj files, one per figure row")->required();
    plot_cmd->add_option("--out", plot_out, "Output prefix for <prefix>.csv and <prefix>.svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        if (!(g.dt > 0.0) || g.dt > kMaxDt) throw ConfigError("invalid_dt", "--dt must lie in (0, 0.5]");
        if (*run_cmd) return cmd_run(g, run);
        if (*serve_cmd) return cmd_serve(g, serve);
        if (*join_cmd) return cmd_join(g, join);
        if (*fly_cmd) return cmd_fly(g, fly);
        if (*replay_cmd) return cmd_replay(replay_files);
        if (*plot_cmd) return cmd_plot(plot_files, plot_out);
    } catch (const Error& e) {
        std::cout << std::flush;
        std::cerr << "error: " << e.code() << ": " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cout << std::flush;
        std::cerr << "error: internal: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
