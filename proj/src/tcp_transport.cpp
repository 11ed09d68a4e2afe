#include <aerogym/transport.hpp>

#include <aerogym/error.hpp>

#include <boost/asio.hpp>

#include <sys/socket.h>

#include <array>
#include <atomic>

namespace aerogym {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

class TcpConnection final : public Connection {
public:
    TcpConnection(std::unique_ptr<asio::io_context> io, tcp::socket socket)
        : io_(std::move(io)), socket_(std::move(socket)) {
        boost::system::error_code ignored;
        socket_.set_option(tcp::no_delay(true), ignored);
    }
    ~TcpConnection() override {
        close();
        boost::system::error_code ignored;
        socket_.close(ignored);
    }

    void send(std::string_view body) override {
        const std::string frame = encode_frame(body);
        std::lock_guard lock(send_mutex_);
        boost::system::error_code ec;
        if (!closed_) asio::write(socket_, asio::buffer(frame), ec);
        if (closed_ || ec) {
            throw TransportError("connection_closed", "tcp send failed: " + ec.message());
        }
    }

    std::optional<std::string> receive() override {
        std::array<unsigned char, kFrameHeaderBytes> header{};
        boost::system::error_code ec;
        asio::read(socket_, asio::buffer(header), ec);
        if (ec) return std::nullopt;
        std::uint32_t n = 0;
        for (unsigned char b : header) n = (n << 8) | b;
        if (n > kMaxFrameBytes) {
            throw ProtocolError("frame_too_large", "incoming frame of " + std::to_string(n) + " bytes");
        }
        std::string body(n, '\0');
        asio::read(socket_, asio::buffer(body), ec);
        if (ec) return std::nullopt;
        return body;
    }

    void close() override {
        // shutdown() rather than close() so a reader blocked in another
        // thread wakes up; the descriptor is released in the destructor.
        if (!closed_.exchange(true)) ::shutdown(socket_.native_handle(), SHUT_RDWR);
    }

private:
    std::unique_ptr<asio::io_context> io_;
    tcp::socket socket_;
    std::mutex send_mutex_;
    std::atomic<bool> closed_{false};
};

}  // namespace

struct TcpListener::Impl {
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::atomic<bool> closed{false};
};

TcpListener::TcpListener(const HostPort& address) : impl_(std::make_unique<Impl>()) {
    boost::system::error_code ec;
    const auto ip = asio::ip::make_address(address.host == "localhost" ? "127.0.0.1" : address.host, ec);
    if (ec) throw TransportError("listen_failed", "bad listen host '" + address.host + "'");
    const tcp::endpoint endpoint(ip, address.port);
    impl_->acceptor.open(endpoint.protocol(), ec);
    if (!ec) impl_->acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) impl_->acceptor.bind(endpoint, ec);
    if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
        throw TransportError("listen_failed", "cannot listen on " + address.host + ":" +
                                                  std::to_string(address.port) + ": " + ec.message());
    }
}

TcpListener::~TcpListener() {
    close();
    boost::system::error_code ignored;
    impl_->acceptor.close(ignored);
}

std::unique_ptr<Connection> TcpListener::accept() {
    auto io = std::make_unique<asio::io_context>();
    tcp::socket socket(*io);
    boost::system::error_code ec;
    impl_->acceptor.accept(socket, ec);
    if (ec || impl_->closed) return nullptr;
    return std::make_unique<TcpConnection>(std::move(io), std::move(socket));
}

void TcpListener::close() {
    if (!impl_->closed.exchange(true)) ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
}

std::uint16_t TcpListener::port() const { return impl_->acceptor.local_endpoint().port(); }

std::unique_ptr<Connection> tcp_connect(const HostPort& address) {
    auto io = std::make_unique<asio::io_context>();
    tcp::resolver resolver(*io);
    boost::system::error_code ec;
    const auto endpoints = resolver.resolve(address.host, std::to_string(address.port), ec);
    tcp::socket socket(*io);
    if (!ec) asio::connect(socket, endpoints, ec);
    if (ec) {
        throw TransportError("connection_refused", "cannot connect to " + address.host + ":" +
                                                       std::to_string(address.port) + ": " + ec.message());
    }
    return std::make_unique<TcpConnection>(std::move(io), std::move(socket));
}

}  // namespace aerogym
