#pragma once

// Duplex frame streams. Both transports carry exactly the bytes produced
// by encode_frame; the in-process one exists so distributed behaviour can
// be exercised deterministically inside a test binary.

#include <aerogym/protocol.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aerogym {

class Connection {
public:
    virtual ~Connection() = default;

    /// Sends one frame. Throws TransportError("connection_closed").
    virtual void send(std::string_view body) = 0;
    /// Blocks for the next frame body; nullopt once the stream is closed
    /// and drained.
    virtual std::optional<std::string> receive() = 0;
    /// Idempotent; wakes a receiver blocked on this end.
    virtual void close() = 0;

    void send_message(const Message& m) { send(encode_message(m)); }
    std::optional<Message> receive_message();
};

class Listener {
public:
    virtual ~Listener() = default;
    /// Blocks for the next client; nullptr once closed.
    virtual std::unique_ptr<Connection> accept() = 0;
    virtual void close() = 0;
};

/// Deterministic in-memory network. Records which endpoint connected to
/// which address so tests can check the topology.
class InProcessNetwork : public std::enable_shared_from_this<InProcessNetwork> {
public:
    static std::shared_ptr<InProcessNetwork> create();

    std::unique_ptr<Listener> listen(const std::string& address);
    /// Throws TransportError("connection_refused") when nothing listens there.
    std::unique_ptr<Connection> connect(const std::string& client, const std::string& address);

    std::vector<std::pair<std::string, std::string>> edges() const;  // (client, address)
    std::vector<std::string> listening_addresses() const;

private:
    struct ListenerState;
    friend class InProcessListener;

    InProcessNetwork() = default;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<ListenerState>> listeners_;
    std::vector<std::pair<std::string, std::string>> edges_;
};

struct HostPort {
    std::string host;
    std::uint16_t port = 0;
};

/// "host:port"; throws ConfigError("invalid_address").
HostPort parse_host_port(std::string_view text);

class TcpListener final : public Listener {
public:
    /// Port 0 picks an ephemeral port. Throws TransportError("listen_failed").
    explicit TcpListener(const HostPort& address);
    ~TcpListener() override;

    std::unique_ptr<Connection> accept() override;
    void close() override;
    std::uint16_t port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Throws TransportError("connection_refused").
std::unique_ptr<Connection> tcp_connect(const HostPort& address);

}  // namespace aerogym
