#include <aerogym/bridge.hpp>
#include <aerogym/error.hpp>
#include <aerogym/serialization.hpp>

#include "test_support.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <fstream>
#include <set>
#include <thread>

namespace aerogym {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using asio::ip::tcp;
using testing::make_team;

std::string frame_text(std::int64_t ts, double ail, double ele, double rud, double thr,
                       const std::string& source = "keyboard") {
    return canonical_dump(manual_frame_to_json({ts, ail, ele, rud, thr, source}));
}

/// Minimal cockpit: a websocket client on its own io_context.
struct Cockpit {
    asio::io_context io;
    websocket::stream<tcp::socket> ws{io};

    explicit Cockpit(std::uint16_t port) {
        tcp::resolver resolver(io);
        asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws.handshake("127.0.0.1", "/");
        ws.text(true);
    }
    void send(const std::string& text) { ws.write(asio::buffer(text)); }
    nlohmann::json receive() {
        beast::flat_buffer buffer;
        ws.read(buffer);
        return nlohmann::json::parse(beast::buffers_to_string(buffer.data()));
    }
};

template <typename Pred>
bool eventually(Pred pred) {
    for (int i = 0; i < 500; ++i) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return false;
}

nlohmann::json load_schema() {
    std::ifstream in(std::filesystem::path(AEROGYM_SOURCE_DIR) / "docs" / "bridge.schema.json");
    return nlohmann::json::parse(in);
}

std::set<std::string> keys(const nlohmann::json& j) {
    std::set<std::string> out;
    for (const auto& [k, v] : j.items()) out.insert(k);
    return out;
}

TEST(ManualFrame, RoundTripAndRanges) {
    const ManualControlFrame f{17, -1.0, 0.5, 1.0, 0.0, "joystick"};
    EXPECT_EQ(parse_manual_frame(canonical_dump(manual_frame_to_json(f))), f);
    for (const std::string bad :
         {std::string("nope"), std::string("[]"), frame_text(1, 1.5, 0, 0, 0.5), frame_text(1, 0, -1.01, 0, 0.5),
          frame_text(1, 0, 0, 0, 1.2), frame_text(1, 0, 0, 0, -0.1), frame_text(1, 0, 0, 0, 0.5, "mouse"),
          std::string(R"({"timestamp":1.5,"aileron":0,"elevator":0,"rudder":0,"throttle":0,"source":"keyboard"})"),
          std::string(R"({"aileron":0,"elevator":0,"rudder":0,"throttle":0,"source":"keyboard"})")}) {
        try {
            parse_manual_frame(bad);
            ADD_FAILURE() << bad;
        } catch (const ProtocolError& e) {
            EXPECT_EQ(e.code(), "malformed_frame");
        }
    }
}

TEST(FrameInbox, HoldsNewestAndCountsRejects) {
    FrameInbox inbox;
    EXPECT_FALSE(inbox.latest().has_value());
    EXPECT_TRUE(inbox.offer(frame_text(10, 0.1, 0, 0, 0.5)));
    EXPECT_FALSE(inbox.offer("garbage"));
    EXPECT_EQ(inbox.latest()->aileron, 0.1);  // a bad frame leaves the held one alone
    EXPECT_FALSE(inbox.offer(frame_text(9, 0.9, 0, 0, 0.5)));  // timestamp went backwards
    EXPECT_TRUE(inbox.offer(frame_text(10, 0.2, 0, 0, 0.5)));  // equal is fine
    EXPECT_EQ(inbox.latest()->aileron, 0.2);
    EXPECT_EQ(inbox.malformed(), 2u);
    EXPECT_EQ(inbox.accepted(), 2u);
}

TEST(FrameInbox, RandomFramesProperty) {
    // Whatever arrives, the held frame is always a legal one.
    std::mt19937_64 rng(12);
    FrameInbox inbox;
    std::int64_t ts = 0;
    for (int i = 0; i < 2000; ++i) {
        ts += std::uniform_int_distribution<int>(-3, 10)(rng);
        inbox.offer(frame_text(ts, testing::uniform(rng, -1.5, 1.5), testing::uniform(rng, -1.5, 1.5),
                               testing::uniform(rng, -1.5, 1.5), testing::uniform(rng, -0.5, 1.5)));
        if (auto f = inbox.latest()) {
            ASSERT_LE(std::abs(f->aileron), 1.0);
            ASSERT_LE(std::abs(f->elevator), 1.0);
            ASSERT_LE(std::abs(f->rudder), 1.0);
            ASSERT_GE(f->throttle, 0.0);
            ASSERT_LE(f->throttle, 1.0);
        }
    }
    EXPECT_EQ(inbox.accepted() + inbox.malformed(), 2000u);
}

TEST(BridgeSchema, MatchesEmittedMessages) {
    const nlohmann::json schema = load_schema();
    const auto& defs = schema.at("definitions");
    const auto frame = manual_frame_to_json({1, 0, 0, 0, 0, "keyboard"});
    EXPECT_EQ(keys(frame), defs.at("manual_control_frame").at("required").get<std::set<std::string>>());
    const auto t = telemetry_message(3, AircraftState{}, ControlInputs{}, 0.5, false, 2);
    const auto& tdef = defs.at("telemetry");
    EXPECT_EQ(keys(t), tdef.at("required").get<std::set<std::string>>());
    EXPECT_EQ(keys(t.at("state")), tdef.at("properties").at("state").at("required").get<std::set<std::string>>());
    EXPECT_EQ(keys(t.at("controls")),
              tdef.at("properties").at("controls").at("required").get<std::set<std::string>>());
    const auto& props = defs.at("manual_control_frame").at("properties");
    EXPECT_EQ(props.at("throttle").at("minimum"), 0);
    EXPECT_EQ(props.at("aileron").at("minimum"), -1);
}

TEST(CockpitBridge, FramesInTelemetryOut) {
    CockpitBridge bridge("127.0.0.1", 0);
    EXPECT_FALSE(bridge.wait_for_cockpit(std::chrono::milliseconds(10)));
    Cockpit cockpit(bridge.port());
    ASSERT_TRUE(bridge.wait_for_cockpit(std::chrono::milliseconds(2000)));
    cockpit.send(frame_text(1, 0.3, -0.2, 0.0, 0.8));
    cockpit.send("{broken");
    ASSERT_TRUE(eventually([&] { return bridge.inbox().accepted() == 1 && bridge.inbox().malformed() == 1; }));
    EXPECT_EQ(bridge.inbox().latest()->elevator, -0.2);
    bridge.send(telemetry_message(4, AircraftState{}, ControlInputs::clamped(0.3, -0.2, 0, 0.8), 1.0, true, 1));
    const nlohmann::json t = cockpit.receive();
    EXPECT_EQ(t.at("step_index"), 4);
    EXPECT_EQ(t.at("done"), true);
    EXPECT_EQ(t.at("malformed_frames"), 1);
    EXPECT_EQ(t.at("controls").at("aileron"), 0.3);
}

TEST(CockpitBridge, PortInUse) {
    CockpitBridge first("127.0.0.1", 0);
    try {
        CockpitBridge second("127.0.0.1", first.port());
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.code(), "listen_failed");
    }
}

TeamConfig manual_team(double seconds) {
    TeamConfig t = make_team("pilot", {{"cessna172p", "one",
                                        make_task_by_name("reach_static_target_altitude", {{"target", 1000}})}},
                             seconds);
    t.roster[0].controller = "manual";
    return t;
}

TEST(FlyEpisode, NoFramesHoldsInitialControls) {
    CockpitBridge bridge("127.0.0.1", 0);
    Environment env(std::make_unique<EmbeddedLink>(), {kDefaultDt, 1});
    env.reset(manual_team(2.0));
    TeamPilot pilot(env.runtime());
    const double throttle = env.runtime().initial_trim(0).controls.throttle();
    std::vector<ControlInputs> applied;
    FlyOptions opt;
    opt.pace = 0.0;
    opt.after_step = [&](const TeamRuntime& rt, const StepResult&) { applied.push_back(rt.actions()[0]); };
    const FlySummary s = fly_episode(env, pilot, bridge, opt);
    EXPECT_EQ(s.steps, 20);
    ASSERT_EQ(applied.size(), 20u);
    for (const auto& c : applied) EXPECT_EQ(c, ControlInputs::clamped(0, 0, 0, throttle));
}

TEST(FlyEpisode, LastFrameBeforeEachStepIsApplied) {
    CockpitBridge bridge("127.0.0.1", 0);
    Cockpit cockpit(bridge.port());
    ASSERT_TRUE(bridge.wait_for_cockpit(std::chrono::milliseconds(2000)));
    Environment env(std::make_unique<EmbeddedLink>(), {kDefaultDt, 1});
    env.reset(manual_team(3.0));
    TeamPilot pilot(env.runtime());

    // The hook runs after the controls for a step are latched, so a frame
    // sent from it before step 5 first applies at step 6 and is then held.
    std::vector<ControlInputs> applied;
    FlyOptions opt;
    opt.pace = 0.0;
    opt.before_step = [&](const TeamRuntime& rt) {
        if (rt.step_index() == 5) {
            cockpit.send(frame_text(100, 0.4, 0.1, -0.1, 0.9));
            ASSERT_TRUE(eventually([&] { return bridge.inbox().accepted() == 1; }));
        }
    };
    opt.after_step = [&](const TeamRuntime& rt, const StepResult&) { applied.push_back(rt.actions()[0]); };
    std::thread drain([&] {
        try {
            for (;;) {
                if (cockpit.receive().at("done") == true) break;
            }
        } catch (...) {
        }
    });
    const FlySummary s = fly_episode(env, pilot, bridge, opt);
    drain.join();
    ASSERT_EQ(s.steps, 30);
    const ControlInputs frame = ControlInputs::clamped(0.4, 0.1, -0.1, 0.9);
    // Step t applies the frame held strictly before its dynamics call.
    for (std::size_t t = 0; t < applied.size(); ++t) {
        if (t <= 5) {
            EXPECT_NE(applied[t], frame) << t;
        } else {
            EXPECT_EQ(applied[t], frame) << t;
        }
    }
}

TEST(FlyEpisode, RequiresExactlyOneManualAircraft) {
    CockpitBridge bridge("127.0.0.1", 0);
    Environment env(std::make_unique<EmbeddedLink>(), {kDefaultDt, 1});
    env.reset(make_team("auto", {{"f15", "one"}}, 1.0));
    TeamPilot pilot(env.runtime());
    try {
        fly_episode(env, pilot, bridge, {});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.code(), "manual_aircraft");
    }
}

}  // namespace
}  // namespace aerogym
