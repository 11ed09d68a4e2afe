#pragma once

// Cockpit bridge: a websocket endpoint that takes ManualControlFrames from a
// browser cockpit and streams per-step telemetry back. Text frames only,
// each one canonical JSON. The latest valid frame is held until replaced.

#include <aerogym/dynamics.hpp>
#include <aerogym/environment.hpp>
#include <aerogym/pilot.hpp>

#include <json.hpp>

#include <chrono>
#include <functional>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace aerogym {

struct ManualControlFrame {
    std::int64_t timestamp_ms = 0;
    double aileron = 0.0;
    double elevator = 0.0;
    double rudder = 0.0;
    double throttle = 0.0;
    std::string source = "keyboard";  // or "joystick"

    ControlInputs controls() const { return ControlInputs::clamped(aileron, elevator, rudder, throttle); }

    friend bool operator==(const ManualControlFrame&, const ManualControlFrame&) = default;
};

nlohmann::json manual_frame_to_json(const ManualControlFrame& frame);
/// Rejects missing fields, out-of-range values and unknown sources with
/// ProtocolError("malformed_frame").
ManualControlFrame parse_manual_frame(std::string_view text);

/// {step_index, state{north..sim_time, airspeed, altitude}, controls,
///  reward, done, malformed_frames}
nlohmann::json telemetry_message(std::int64_t step_index, const AircraftState& state,
                                 const ControlInputs& controls, double reward, bool done,
                                 std::uint64_t malformed_frames);

/// Holds the newest accepted frame. Thread-safe.
class FrameInbox {
public:
    /// False (and the counter bumped) for a malformed frame or one whose
    /// timestamp goes backwards.
    bool offer(std::string_view text);
    std::optional<ManualControlFrame> latest() const;
    std::uint64_t malformed() const;
    std::uint64_t accepted() const;

private:
    mutable std::mutex mutex_;
    std::optional<ManualControlFrame> latest_;
    std::uint64_t malformed_ = 0;
    std::uint64_t accepted_ = 0;
};

inline constexpr std::uint16_t kDefaultBridgePort = 9001;

/// Websocket server for one cockpit at a time; a new cockpit replaces the
/// previous one. Port 0 picks an ephemeral port.
class CockpitBridge {
public:
    CockpitBridge(const std::string& host, std::uint16_t port);
    ~CockpitBridge();

    CockpitBridge(const CockpitBridge&) = delete;
    CockpitBridge& operator=(const CockpitBridge&) = delete;

    std::uint16_t port() const;
    bool wait_for_cockpit(std::chrono::milliseconds timeout);
    bool connected() const;

    const FrameInbox& inbox() const { return inbox_; }
    /// Sends to the connected cockpit, if any; a dead socket is dropped.
    void send(const nlohmann::json& message);
    void close();

private:
    struct Impl;
    FrameInbox inbox_;
    std::unique_ptr<Impl> impl_;
};

struct FlyOptions {
    /// Wall-clock seconds per simulated second; 0 runs unpaced.
    double pace = 1.0;
    /// Around every Environment::step (recording hooks).
    std::function<void(const TeamRuntime&)> before_step;
    std::function<void(const TeamRuntime&, const StepResult&)> after_step;
};

struct FlySummary {
    std::int64_t steps = 0;
    double total_reward = 0.0;  // manual aircraft
    std::optional<std::string> terminal;
    std::uint64_t malformed_frames = 0;
};

/// Flies one episode of a reset environment whose team has exactly one
/// manual aircraft. Before each step the newest cockpit frame, if any,
/// replaces the held manual controls; after it, telemetry goes out. A
/// step-0 telemetry message is sent first.
/// Throws ConfigError("manual_aircraft") unless exactly one is manual.
FlySummary fly_episode(Environment& env, TeamPilot& pilot, CockpitBridge& bridge, const FlyOptions& options);

}  // namespace aerogym
