#include "meshscape/protocol/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <memory>

namespace meshscape::protocol {

namespace {

int remaining_ms(Deadline deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - SteadyClock::now());
    if (left.count() <= 0) return 0;
    return static_cast<int>(std::min<std::int64_t>(left.count(), 60'000));
}

// Waits for `events` on fd until the deadline; false on timeout.
bool wait_for(int fd, short events, Deadline deadline) {
    while (true) {
        pollfd pfd{fd, events, 0};
        const int timeout = remaining_ms(deadline);
        const int rc = ::poll(&pfd, 1, timeout);
        if (rc > 0) return true;
        if (rc == 0) {
            if (SteadyClock::now() >= deadline) return false;
            continue;
        }
        if (errno == EINTR) continue;
        throw Unreachable(std::string("poll failed: ") + std::strerror(errno));
    }
}

void set_nonblocking(int fd) {
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

struct AddrInfoDeleter {
    void operator()(addrinfo* ai) const { ::freeaddrinfo(ai); }
};

std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const std::string& host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* result = nullptr;
    const std::string service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &result);
    if (rc != 0) throw Unreachable("cannot resolve '" + host + "': " + ::gai_strerror(rc));
    return std::unique_ptr<addrinfo, AddrInfoDeleter>(result);
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
        throw std::invalid_argument("expected host:port, got '" + std::string(text) + "'");
    }
    unsigned port = 0;
    const auto digits = text.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 65535) {
        throw std::invalid_argument("bad port in '" + std::string(text) + "'");
    }
    std::string host(text.substr(0, colon));
    if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    return Endpoint{std::move(host), static_cast<std::uint16_t>(port)};
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.release();
    }
    return *this;
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Socket connect_tcp(const Endpoint& endpoint, Deadline deadline) {
    auto addrs = resolve(endpoint.host, endpoint.port, false);
    std::string last_error = "no addresses";
    for (addrinfo* ai = addrs.get(); ai != nullptr; ai = ai->ai_next) {
        Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!sock.valid()) {
            last_error = std::strerror(errno);
            continue;
        }
        set_nonblocking(sock.fd());
        int rc = ::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno != EINPROGRESS) {
            last_error = std::strerror(errno);
            continue;
        }
        if (rc != 0) {
            if (!wait_for(sock.fd(), POLLOUT, deadline)) {
                throw Timeout("connect to " + endpoint.str() + " timed out");
            }
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) {
                last_error = std::strerror(err);
                continue;
            }
        }
        const int one = 1;
        ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return sock;
    }
    throw Unreachable("cannot connect to " + endpoint.str() + ": " + last_error);
}

void send_all(const Socket& socket, std::span<const std::uint8_t> bytes, Deadline deadline) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(socket.fd(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            if (!wait_for(socket.fd(), POLLOUT, deadline)) throw Timeout("send timed out");
            continue;
        }
        if (n < 0 && errno == EINTR) continue;
        throw Unreachable(std::string("send failed: ") + std::strerror(errno));
    }
}

std::size_t recv_some(const Socket& socket, std::span<std::uint8_t> buffer, Deadline deadline) {
    while (true) {
        const ssize_t n = ::recv(socket.fd(), buffer.data(), buffer.size(), 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            if (!wait_for(socket.fd(), POLLIN, deadline)) throw Timeout("receive timed out");
            continue;
        }
        if (errno == EINTR) continue;
        throw Unreachable(std::string("receive failed: ") + std::strerror(errno));
    }
}

Socket listen_tcp(const std::string& host, std::uint16_t port) {
    auto addrs = resolve(host, port, true);
    std::string last_error = "no addresses";
    for (addrinfo* ai = addrs.get(); ai != nullptr; ai = ai->ai_next) {
        Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!sock.valid()) continue;
        const int one = 1;
        ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(sock.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(sock.fd(), 128) != 0) {
            last_error = std::strerror(errno);
            continue;
        }
        set_nonblocking(sock.fd());
        return sock;
    }
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + last_error);
}

std::uint16_t local_port(const Socket& socket) {
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
    if (addr.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
    return 0;
}

}  // namespace meshscape::protocol
