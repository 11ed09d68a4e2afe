#pragma once

// Centralized state server for the online modes. ServerCore is the
// message-level state machine (admission, barrier, episode end) and does no
// I/O; StateServer runs it over a Listener with one reader thread per
// connection feeding a single event loop. RemoteLink is the client side.

#include <aerogym/central_state.hpp>
#include <aerogym/environment.hpp>
#include <aerogym/protocol.hpp>
#include <aerogym/transport.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace aerogym {

enum class AdmissionMode { k_fixed, open };

std::string_view to_string(AdmissionMode mode);
/// Accepts "k-fixed"/"k_fixed" and "open".
std::optional<AdmissionMode> admission_mode_from_string(std::string_view text);

struct ServerConfig {
    AdmissionMode mode = AdmissionMode::k_fixed;
    int k = 2;
    double dt = kDefaultDt;
    std::string listen_address = "127.0.0.1:7700";
    std::chrono::milliseconds step_timeout{30000};
    /// Open mode: also start by itself once this many teams have joined.
    std::optional<int> auto_start;
    /// k-fixed mode: finish after this many episodes instead of serving forever.
    std::optional<int> max_episodes;
};

/// Throws ConfigError naming the offending field.
void validate(const ServerConfig& config);

/// Deny codes carried in JOIN_DENY payloads.
namespace deny_code {
inline constexpr const char* simulation_full = "simulation_full";
inline constexpr const char* simulation_started = "simulation_started";
inline constexpr const char* duplicate_team_name = "duplicate_team_name";
}  // namespace deny_code

using ConnectionId = std::uint64_t;

struct Outgoing {
    ConnectionId to = 0;
    Message message;
};

struct CoreOutput {
    std::vector<Outgoing> messages;  // in send order
    std::vector<ConnectionId> close;  // closed after the messages went out

    void append(CoreOutput other);
};

class ServerCore {
public:
    enum class Phase { admitting, running, finished };

    explicit ServerCore(ServerConfig config);

    CoreOutput on_frame(ConnectionId from, std::string_view body);
    CoreOutput on_disconnect(ConnectionId id);
    /// Open-mode start command. No-op with zero admitted teams.
    CoreOutput start();
    /// Step barrier expired.
    CoreOutput on_timeout();

    Phase phase() const { return phase_; }
    const ServerConfig& config() const { return config_; }
    /// Bumped every time a CENTRAL_STATE round goes out; the driver rearms
    /// the step timeout on change.
    std::uint64_t barrier_generation() const { return generation_; }
    std::size_t accepts_issued() const { return accepts_; }
    std::size_t admitted() const { return hub_.team_count(); }
    std::int64_t episodes_completed() const { return episodes_; }

    /// Called with every assembled central state, step 0 included.
    void set_observer(std::function<void(const CentralState&)> observer) { observer_ = std::move(observer); }
    void set_logger(std::function<void(const std::string&)> logger) { logger_ = std::move(logger); }

private:
    struct Peer {
        std::optional<std::string> team;
    };

    CoreOutput handle_join(ConnectionId from, const Message& m);
    CoreOutput handle_report(ConnectionId from, const std::string& team, const Message& m);
    CoreOutput violation(ConnectionId from, const std::string& code, const std::string& text);
    CoreOutput begin();
    CoreOutput broadcast(const CentralHub::Assembly& assembly);
    CoreOutput end_episode(const std::string& reason, nlohmann::json detail = nlohmann::json::object());
    void log(const std::string& line) const;

    ServerConfig config_;
    Phase phase_ = Phase::admitting;
    CentralHub hub_;
    std::map<ConnectionId, Peer> peers_;
    std::map<std::string, ConnectionId> teams_;
    std::uint64_t generation_ = 0;
    std::size_t accepts_ = 0;
    std::int64_t episodes_ = 0;
    std::function<void(const CentralState&)> observer_;
    std::function<void(const std::string&)> logger_;
};

class StateServer {
public:
    StateServer(ServerConfig config, std::unique_ptr<Listener> listener);
    ~StateServer();

    StateServer(const StateServer&) = delete;
    StateServer& operator=(const StateServer&) = delete;

    /// Serves until stop(), or until the episode ends in open mode.
    void run();
    /// Thread-safe.
    void request_start();
    void stop();

    /// Install before run().
    void set_observer(std::function<void(const CentralState&)> observer);
    void set_logger(std::function<void(const std::string&)> logger);

    const ServerCore& core() const { return core_; }

private:
    struct Event {
        enum class Type { connected, frame, closed, start, stop } type;
        ConnectionId id = 0;
        std::string body{};
        std::shared_ptr<Connection> connection{};
    };

    void push(Event event);
    void apply(const CoreOutput& out);

    ServerCore core_;
    std::unique_ptr<Listener> listener_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Event> events_;
    std::map<ConnectionId, std::shared_ptr<Connection>> connections_;
    std::vector<std::thread> threads_;
    std::atomic<ConnectionId> next_id_{1};
};

/// Client side of the online modes.
class RemoteLink final : public CentralLink {
public:
    using Connector = std::function<std::unique_ptr<Connection>()>;

    explicit RemoteLink(Connector connector);
    ~RemoteLink() override;

    /// Throws EnvironmentError with the JOIN_DENY code on denial,
    /// ConfigError when the server rejects the team at start.
    JoinResult join(const TeamJoin& join, double requested_dt) override;
    /// Throws ProtocolError for ERROR replies and EnvironmentError when the
    /// episode ends without a central state (timeout, desync, disconnect).
    TeamView report(const TeamReport& report) override;

private:
    Message receive();
    void disconnect();

    Connector connector_;
    std::unique_ptr<Connection> connection_;
    std::string team_;
};

}  // namespace aerogym
