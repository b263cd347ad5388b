#pragma once

// Byte transports between client and board server: an in-process loopback
// and POSIX TCP for commands, UDP for status packets.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "awg/protocol.hpp"
#include "awg/server.hpp"

namespace awg {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// "host:port"; throws ConfigError.
Endpoint parse_endpoint(const std::string& text);
std::string to_string(const Endpoint& e);

class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(std::span<const std::uint8_t> bytes) = 0;
    /// Blocks until at least one byte is available. Returns 0 once the peer
    /// has closed.
    virtual std::size_t receive(std::span<std::uint8_t> buffer) = 0;
};

/// Feeds a Session on an in-process server directly.
class LoopbackTransport final : public Transport {
public:
    explicit LoopbackTransport(BoardServer& server) : session_(server) {}

    void send(std::span<const std::uint8_t> bytes) override;
    std::size_t receive(std::span<std::uint8_t> buffer) override;

private:
    Session session_;
    std::vector<std::uint8_t> inbox_;
    std::size_t read_pos_ = 0;
};

class TcpTransport final : public Transport {
public:
    /// Throws ConnectionError.
    static std::unique_ptr<TcpTransport> connect(const Endpoint& to, int timeout_ms = 5000);
    ~TcpTransport() override;

    void send(std::span<const std::uint8_t> bytes) override;
    std::size_t receive(std::span<std::uint8_t> buffer) override;

private:
    explicit TcpTransport(int fd) : fd_(fd) {}
    int fd_;
};

/// Accepts any number of connections; each gets its own Session on the
/// shared server, whose mutex serialises the commands.
class TcpServer {
public:
    /// Binds and listens immediately; port 0 picks a free port. Throws ConnectionError.
    TcpServer(BoardServer& server, const Endpoint& listen);
    ~TcpServer();

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    Endpoint endpoint() const { return bound_; }
    void start();
    void stop();

private:
    void accept_loop();
    void serve(int fd);

    BoardServer& server_;
    Endpoint bound_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex conn_mutex_;
    std::vector<int> conn_fds_;
    std::vector<std::thread> workers_;
};

class UdpStatusSender {
public:
    /// Throws ConnectionError.
    explicit UdpStatusSender(const Endpoint& to);
    ~UdpStatusSender();

    void send(const proto::StatusPacket& packet);

private:
    int fd_ = -1;
    std::vector<std::uint8_t> addr_;
};

class UdpStatusReceiver {
public:
    /// Binds `at`; port 0 picks a free port. Throws ConnectionError.
    explicit UdpStatusReceiver(const Endpoint& at);
    ~UdpStatusReceiver();

    Endpoint endpoint() const { return bound_; }
    /// Next well-formed packet, or nullopt after `timeout_ms`.
    std::optional<proto::StatusPacket> receive(int timeout_ms);

private:
    int fd_ = -1;
    Endpoint bound_;
};

} // namespace awg
