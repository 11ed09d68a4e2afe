#include <aerogym/bridge.hpp>

#include <aerogym/error.hpp>
#include <aerogym/serialization.hpp>
#include <aerogym/team_config.hpp>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <cmath>
#include <condition_variable>
#include <thread>

namespace aerogym {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using asio::ip::tcp;

nlohmann::json manual_frame_to_json(const ManualControlFrame& f) {
    return {{"timestamp", f.timestamp_ms}, {"aileron", f.aileron}, {"elevator", f.elevator},
            {"rudder", f.rudder},          {"throttle", f.throttle}, {"source", f.source}};
}

namespace {

[[noreturn]] void bad_frame(const std::string& what) { throw ProtocolError("malformed_frame", what); }

double ranged(const nlohmann::json& j, const char* key, double lo, double hi) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) bad_frame(std::string("'") + key + "' must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v) || v < lo || v > hi) bad_frame(std::string("'") + key + "' out of range");
    return v;
}

}  // namespace

ManualControlFrame parse_manual_frame(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        bad_frame("not JSON");
    }
    if (!j.is_object()) bad_frame("frame must be an object");
    ManualControlFrame f;
    auto ts = j.find("timestamp");
    if (ts == j.end() || !ts->is_number_integer()) bad_frame("'timestamp' must be an integer (ms)");
    f.timestamp_ms = ts->get<std::int64_t>();
    f.aileron = ranged(j, "aileron", -1.0, 1.0);
    f.elevator = ranged(j, "elevator", -1.0, 1.0);
    f.rudder = ranged(j, "rudder", -1.0, 1.0);
    f.throttle = ranged(j, "throttle", 0.0, 1.0);
    auto src = j.find("source");
    if (src == j.end() || !src->is_string()) bad_frame("'source' must be a string");
    f.source = src->get<std::string>();
    if (f.source != "keyboard" && f.source != "joystick") bad_frame("unknown source '" + f.source + "'");
    return f;
}

nlohmann::json telemetry_message(std::int64_t step_index, const AircraftState& state,
                                 const ControlInputs& controls, double reward, bool done,
                                 std::uint64_t malformed_frames) {
    nlohmann::json s = nlohmann::json::object();
    for (StateField f : all_state_fields()) s[std::string(to_string(f))] = extract_field(state, f);
    return {{"step_index", step_index},
            {"state", std::move(s)},
            {"controls", controls_to_json(controls)},
            {"reward", reward},
            {"done", done},
            {"malformed_frames", malformed_frames}};
}

bool FrameInbox::offer(std::string_view text) {
    std::optional<ManualControlFrame> f;
    try {
        f = parse_manual_frame(text);
    } catch (const ProtocolError&) {
    }
    std::lock_guard lock(mutex_);
    if (!f || (latest_ && f->timestamp_ms < latest_->timestamp_ms)) {
        ++malformed_;
        return false;
    }
    latest_ = std::move(f);
    ++accepted_;
    return true;
}

std::optional<ManualControlFrame> FrameInbox::latest() const {
    std::lock_guard lock(mutex_);
    return latest_;
}

std::uint64_t FrameInbox::malformed() const {
    std::lock_guard lock(mutex_);
    return malformed_;
}

std::uint64_t FrameInbox::accepted() const {
    std::lock_guard lock(mutex_);
    return accepted_;
}

struct CockpitBridge::Impl {
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread acceptor_thread;
    std::vector<std::thread> readers;

    mutable std::mutex mutex;
    std::condition_variable cv;
    std::shared_ptr<websocket::stream<tcp::socket>> session;  // current cockpit
    std::mutex write_mutex;
    bool closed = false;
};

CockpitBridge::CockpitBridge(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
    boost::system::error_code ec;
    const auto ip = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
    if (ec) throw TransportError("listen_failed", "bad bridge host '" + host + "'");
    const tcp::endpoint endpoint(ip, port);
    impl_->acceptor.open(endpoint.protocol(), ec);
    if (!ec) impl_->acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) impl_->acceptor.bind(endpoint, ec);
    if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
        throw TransportError("listen_failed",
                             "cannot listen on " + host + ":" + std::to_string(port) + ": " + ec.message());
    }
    impl_->acceptor_thread = std::thread([this] {
        Impl& im = *impl_;
        for (;;) {
            tcp::socket socket(im.io);
            boost::system::error_code aec;
            im.acceptor.accept(socket, aec);
            {
                std::lock_guard lock(im.mutex);
                if (im.closed) return;
            }
            if (aec) continue;
            auto ws = std::make_shared<websocket::stream<tcp::socket>>(std::move(socket));
            ws->accept(aec);
            if (aec) continue;
            ws->text(true);
            {
                std::lock_guard lock(im.mutex);
                if (im.session) {
                    boost::system::error_code ignored;
                    im.session->next_layer().shutdown(tcp::socket::shutdown_both, ignored);
                }
                im.session = ws;
            }
            im.cv.notify_all();
            im.readers.emplace_back([this, ws] {
                beast::flat_buffer buffer;
                for (;;) {
                    boost::system::error_code rec;
                    ws->read(buffer, rec);
                    if (rec) break;
                    inbox_.offer(beast::buffers_to_string(buffer.data()));
                    buffer.consume(buffer.size());
                }
                std::lock_guard lock(impl_->mutex);
                if (impl_->session == ws) impl_->session.reset();
            });
        }
    });
}

CockpitBridge::~CockpitBridge() { close(); }

std::uint16_t CockpitBridge::port() const { return impl_->acceptor.local_endpoint().port(); }

bool CockpitBridge::wait_for_cockpit(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mutex);
    return impl_->cv.wait_for(lock, timeout, [&] { return impl_->session != nullptr || impl_->closed; }) &&
           impl_->session != nullptr;
}

bool CockpitBridge::connected() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->session != nullptr;
}

void CockpitBridge::send(const nlohmann::json& message) {
    std::shared_ptr<websocket::stream<tcp::socket>> ws;
    {
        std::lock_guard lock(impl_->mutex);
        ws = impl_->session;
    }
    if (!ws) return;
    const std::string text = canonical_dump(message);
    std::lock_guard lock(impl_->write_mutex);
    boost::system::error_code ec;
    ws->write(asio::buffer(text), ec);
    if (ec) {
        std::lock_guard l(impl_->mutex);
        if (impl_->session == ws) impl_->session.reset();
    }
}

void CockpitBridge::close() {
    if (!impl_) return;
    std::shared_ptr<websocket::stream<tcp::socket>> ws;
    {
        std::lock_guard lock(impl_->mutex);
        if (impl_->closed) return;
        impl_->closed = true;
        ws = impl_->session;
    }
    impl_->cv.notify_all();
    // shutdown() wakes the blocked accept; the acceptor is closed only
    // after its thread is gone.
    boost::system::error_code ignored;
    ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
    if (impl_->acceptor_thread.joinable()) impl_->acceptor_thread.join();
    impl_->acceptor.close(ignored);
    if (ws) ws->next_layer().shutdown(tcp::socket::shutdown_both, ignored);
    for (auto& t : impl_->readers) {
        if (t.joinable()) t.join();
    }
}

FlySummary fly_episode(Environment& env, TeamPilot& pilot, CockpitBridge& bridge, const FlyOptions& options) {
    const auto manual = pilot.manual_indices();
    if (manual.size() != 1) {
        throw ConfigError("manual_aircraft", "fly needs exactly one roster aircraft with controller 'manual', found " +
                                                 std::to_string(manual.size()));
    }
    const std::size_t m = manual[0];
    const TeamRuntime& rt = env.runtime();
    FlySummary summary;
    bridge.send(telemetry_message(0, rt.states()[m], rt.initial_trim(m).controls, 0.0, false,
                                  bridge.inbox().malformed()));
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    for (;;) {
        if (auto frame = bridge.inbox().latest()) pilot.set_manual_controls(m, frame->controls());
        const auto actions = pilot.actions(rt);
        if (options.before_step) options.before_step(rt);
        const StepResult r = env.step(actions);
        if (options.after_step) options.after_step(env.runtime(), r);
        ++summary.steps;
        summary.total_reward += r.rewards[m];
        bridge.send(telemetry_message(summary.steps, rt.states()[m], rt.actions()[m], r.rewards[m], r.done,
                                      bridge.inbox().malformed()));
        if (r.done) break;
        if (options.pace > 0.0) {
            const auto due = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(
                                         options.pace * rt.dt() * static_cast<double>(summary.steps)));
            std::this_thread::sleep_until(due);
        }
    }
    summary.terminal = rt.terminal_reason(m);
    summary.malformed_frames = bridge.inbox().malformed();
    return summary;
}

}  // namespace aerogym
