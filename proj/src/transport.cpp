#include "awg/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "awg/error.hpp"

namespace awg {

namespace {

[[noreturn]] void sys_fail(const std::string& what)
{
    throw Error(Errc::ConnectionError, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const Endpoint& e)
{
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(e.port);
    if (e.host.empty() || e.host == "0.0.0.0") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        return addr;
    }
    if (inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1)
        return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
        throw Error(Errc::ConnectionError, "cannot resolve host " + e.host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

std::uint16_t bound_port(int fd)
{
    sockaddr_in a{};
    socklen_t len = sizeof a;
    if (getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len) != 0)
        sys_fail("getsockname");
    return ntohs(a.sin_port);
}

void write_all(int fd, std::span<const std::uint8_t> bytes)
{
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            sys_fail("send");
        }
        off += static_cast<std::size_t>(n);
    }
}

} // namespace

Endpoint parse_endpoint(const std::string& text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon + 1 == text.size())
        throw Error(Errc::ConfigError, "expected host:port, got '" + text + "'");
    Endpoint e;
    e.host = text.substr(0, colon);
    unsigned port = 0;
    const char* b = text.data() + colon + 1;
    const char* end = text.data() + text.size();
    const auto [p, ec] = std::from_chars(b, end, port);
    if (ec != std::errc{} || p != end || port > 65535)
        throw Error(Errc::ConfigError, "bad port in '" + text + "'");
    e.port = static_cast<std::uint16_t>(port);
    if (e.host.empty())
        e.host = "127.0.0.1";
    return e;
}

std::string to_string(const Endpoint& e) { return e.host + ":" + std::to_string(e.port); }

void LoopbackTransport::send(std::span<const std::uint8_t> bytes)
{
    auto out = session_.feed(bytes);
    if (read_pos_ == inbox_.size()) {
        inbox_.clear();
        read_pos_ = 0;
    }
    inbox_.insert(inbox_.end(), out.begin(), out.end());
}

std::size_t LoopbackTransport::receive(std::span<std::uint8_t> buffer)
{
    const std::size_t n = std::min(buffer.size(), inbox_.size() - read_pos_);
    std::copy_n(inbox_.begin() + static_cast<std::ptrdiff_t>(read_pos_), n, buffer.begin());
    read_pos_ += n;
    return n;
}

std::unique_ptr<TcpTransport> TcpTransport::connect(const Endpoint& to, int timeout_ms)
{
    const auto addr = resolve(to);
    const int step_ms = 50;
    for (int waited = 0;; waited += step_ms) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0)
            sys_fail("socket");
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
        }
        const int err = errno;
        ::close(fd);
        if (waited >= timeout_ms) {
            errno = err;
            sys_fail("connect to " + to_string(to));
        }
        ::usleep(step_ms * 1000);
    }
}

TcpTransport::~TcpTransport()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void TcpTransport::send(std::span<const std::uint8_t> bytes) { write_all(fd_, bytes); }

std::size_t TcpTransport::receive(std::span<std::uint8_t> buffer)
{
    for (;;) {
        const auto n = ::recv(fd_, buffer.data(), buffer.size(), 0);
        if (n >= 0)
            return static_cast<std::size_t>(n);
        if (errno != EINTR)
            sys_fail("recv");
    }
}

TcpServer::TcpServer(BoardServer& server, const Endpoint& listen) : server_(server)
{
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0)
        sys_fail("socket");
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const auto addr = resolve(listen);
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const int err = errno;
        ::close(listen_fd_);
        errno = err;
        sys_fail("bind " + to_string(listen));
    }
    if (::listen(listen_fd_, 16) != 0)
        sys_fail("listen");
    bound_ = {listen.host, bound_port(listen_fd_)};
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start()
{
    if (running_.exchange(true))
        return;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpServer::stop()
{
    if (running_.exchange(false)) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        if (acceptor_.joinable())
            acceptor_.join();
        {
            std::lock_guard lock(conn_mutex_);
            for (int fd : conn_fds_)
                ::shutdown(fd, SHUT_RDWR);
        }
        for (auto& w : workers_)
            if (w.joinable())
                w.join();
        workers_.clear();
    }
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

void TcpServer::accept_loop()
{
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, 100);
        if (r <= 0 || !running_)
            continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0)
            continue;
        int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(conn_mutex_);
        conn_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve(fd); });
    }
}

void TcpServer::serve(int fd)
{
    Session session(server_);
    std::vector<std::uint8_t> buf(1 << 16);
    try {
        for (;;) {
            const auto n = ::recv(fd, buf.data(), buf.size(), 0);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
                break;
            const auto out = session.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
            if (!out.empty())
                write_all(fd, out);
        }
    } catch (const Error&) {
        // peer went away mid-write
    }
    std::lock_guard lock(conn_mutex_);
    std::erase(conn_fds_, fd);
    ::close(fd);
}

UdpStatusSender::UdpStatusSender(const Endpoint& to)
{
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0)
        sys_fail("socket");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_BROADCAST, &one, sizeof one);
    const auto addr = resolve(to);
    addr_.resize(sizeof addr);
    std::memcpy(addr_.data(), &addr, sizeof addr);
}

UdpStatusSender::~UdpStatusSender()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void UdpStatusSender::send(const proto::StatusPacket& packet)
{
    const auto bytes = proto::encode_status(packet);
    // best effort, like the hardware broadcast
    (void)::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(addr_.data()),
                   static_cast<socklen_t>(addr_.size()));
}

UdpStatusReceiver::UdpStatusReceiver(const Endpoint& at)
{
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0)
        sys_fail("socket");
    const auto addr = resolve(at);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const int err = errno;
        ::close(fd_);
        errno = err;
        sys_fail("bind " + to_string(at));
    }
    bound_ = {at.host, bound_port(fd_)};
}

UdpStatusReceiver::~UdpStatusReceiver()
{
    if (fd_ >= 0)
        ::close(fd_);
}

std::optional<proto::StatusPacket> UdpStatusReceiver::receive(int timeout_ms)
{
    std::uint8_t buf[512];
    for (;;) {
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, timeout_ms) <= 0)
            return std::nullopt;
        const auto n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0)
            return std::nullopt;
        if (auto pkt = proto::decode_status(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n))))
            return pkt;
    }
}

} // namespace awg
