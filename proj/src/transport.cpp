#include <aerogym/transport.hpp>

#include <aerogym/error.hpp>

#include <charconv>
#include <condition_variable>
#include <deque>

namespace aerogym {

std::optional<Message> Connection::receive_message() {
    auto body = receive();
    if (!body) return std::nullopt;
    return decode_message(*body);
}

namespace {

// Two byte queues guarded by one mutex; queue[i] holds bytes for end i.
struct Pipe {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> queue[2];
    bool closed = false;
};

class PipeEnd final : public Connection {
public:
    PipeEnd(std::shared_ptr<Pipe> pipe, int side) : pipe_(std::move(pipe)), side_(side) {}
    ~PipeEnd() override { close(); }

    void send(std::string_view body) override {
        std::string frame = encode_frame(body);
        std::lock_guard lock(pipe_->mutex);
        if (pipe_->closed) throw TransportError("connection_closed", "in-process connection closed");
        pipe_->queue[1 - side_].push_back(std::move(frame));
        pipe_->cv.notify_all();
    }

    std::optional<std::string> receive() override {
        for (;;) {
            if (auto body = decoder_.next()) return body;
            std::unique_lock lock(pipe_->mutex);
            auto& q = pipe_->queue[side_];
            pipe_->cv.wait(lock, [&] { return !q.empty() || pipe_->closed; });
            if (q.empty()) return std::nullopt;
            decoder_.feed(q.front());
            q.pop_front();
        }
    }

    void close() override {
        std::lock_guard lock(pipe_->mutex);
        pipe_->closed = true;
        pipe_->cv.notify_all();
    }

private:
    std::shared_ptr<Pipe> pipe_;
    int side_;
    FrameDecoder decoder_;
};

}  // namespace

struct InProcessNetwork::ListenerState {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::unique_ptr<Connection>> pending;
    bool closed = false;
};

class InProcessListener final : public Listener {
public:
    InProcessListener(std::weak_ptr<InProcessNetwork> network, std::string address,
                      std::shared_ptr<InProcessNetwork::ListenerState> state)
        : network_(std::move(network)), address_(std::move(address)), state_(std::move(state)) {}
    ~InProcessListener() override { close(); }

    std::unique_ptr<Connection> accept() override {
        std::unique_lock lock(state_->mutex);
        state_->cv.wait(lock, [&] { return !state_->pending.empty() || state_->closed; });
        if (state_->pending.empty()) return nullptr;
        auto conn = std::move(state_->pending.front());
        state_->pending.pop_front();
        return conn;
    }

    void close() override {
        {
            std::lock_guard lock(state_->mutex);
            if (state_->closed) return;
            state_->closed = true;
            state_->cv.notify_all();
        }
        if (auto net = network_.lock()) {
            std::lock_guard lock(net->mutex_);
            auto it = net->listeners_.find(address_);
            if (it != net->listeners_.end() && it->second == state_) net->listeners_.erase(it);
        }
    }

private:
    std::weak_ptr<InProcessNetwork> network_;
    std::string address_;
    std::shared_ptr<InProcessNetwork::ListenerState> state_;
};

std::shared_ptr<InProcessNetwork> InProcessNetwork::create() {
    return std::shared_ptr<InProcessNetwork>(new InProcessNetwork());
}

std::unique_ptr<Listener> InProcessNetwork::listen(const std::string& address) {
    std::lock_guard lock(mutex_);
    if (listeners_.contains(address)) {
        throw TransportError("listen_failed", "address '" + address + "' is in use");
    }
    auto state = std::make_shared<ListenerState>();
    listeners_.emplace(address, state);
    return std::make_unique<InProcessListener>(weak_from_this(), address, state);
}

std::unique_ptr<Connection> InProcessNetwork::connect(const std::string& client,
                                                      const std::string& address) {
    std::shared_ptr<ListenerState> state;
    {
        std::lock_guard lock(mutex_);
        auto it = listeners_.find(address);
        if (it == listeners_.end()) {
            throw TransportError("connection_refused", "nothing listens on '" + address + "'");
        }
        state = it->second;
        edges_.emplace_back(client, address);
    }
    auto pipe = std::make_shared<Pipe>();
    {
        std::lock_guard lock(state->mutex);
        if (state->closed) {
            throw TransportError("connection_refused", "listener on '" + address + "' closed");
        }
        state->pending.push_back(std::make_unique<PipeEnd>(pipe, 1));
        state->cv.notify_all();
    }
    return std::make_unique<PipeEnd>(pipe, 0);
}

std::vector<std::pair<std::string, std::string>> InProcessNetwork::edges() const {
    std::lock_guard lock(mutex_);
    return edges_;
}

std::vector<std::string> InProcessNetwork::listening_addresses() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [address, state] : listeners_) out.push_back(address);
    return out;
}

HostPort parse_host_port(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw ConfigError("invalid_address", "expected HOST:PORT, got '" + std::string(text) + "'");
    }
    unsigned port = 0;
    const std::string_view digits = text.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty() || port > 65535) {
        throw ConfigError("invalid_address", "invalid port in '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

}  // namespace aerogym
