#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace meshscape::protocol {

using SteadyClock = std::chrono::steady_clock;
using Deadline = SteadyClock::time_point;

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    // "host:port"; throws std::invalid_argument
    static Endpoint parse(std::string_view text);
    std::string str() const { return host + ":" + std::to_string(port); }

    bool operator==(const Endpoint&) const = default;
};

class ClientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Connect or I/O failure.
class Unreachable : public ClientError {
public:
    using ClientError::ClientError;
};

class Timeout : public ClientError {
public:
    using ClientError::ClientError;
};

class RemoteError : public ClientError {
public:
    RemoteError(int code, std::string diagnostic)
        : ClientError("remote error " + std::to_string(code) + ": " + diagnostic),
          code_(code),
          diagnostic_(std::move(diagnostic)) {}

    int code() const { return code_; }
    const std::string& diagnostic() const { return diagnostic_; }

private:
    int code_;
    std::string diagnostic_;
};

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { close(); }

    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() noexcept {
        const int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void shutdown() noexcept;
    void close() noexcept;

private:
    int fd_ = -1;
};

Socket connect_tcp(const Endpoint& endpoint, Deadline deadline);
void send_all(const Socket& socket, std::span<const std::uint8_t> bytes, Deadline deadline);
// Returns 0 on orderly shutdown by the peer.
std::size_t recv_some(const Socket& socket, std::span<std::uint8_t> buffer, Deadline deadline);

Socket listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Socket& socket);

}  // namespace meshscape::protocol
