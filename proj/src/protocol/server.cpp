#include "meshscape/protocol/server.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <iostream>

#include "meshscape/protocol/frame.hpp"

namespace meshscape::protocol {

namespace {
constexpr int kPollSliceMs = 50;
constexpr auto kWriteTimeout = std::chrono::seconds(5);
}  // namespace

FrameServer::FrameServer(std::string host, std::uint16_t port, Handler handler)
    : host_(std::move(host)), requested_port_(port), handler_(std::move(handler)) {}

FrameServer::~FrameServer() { stop(); }

void FrameServer::start() {
    if (running_) return;
    listener_ = listen_tcp(host_, requested_port_);
    bound_port_ = local_port(listener_);
    running_ = true;
    acceptor_ = std::jthread([this](std::stop_token stop) { accept_loop(stop); });
}

void FrameServer::stop() {
    if (!running_.exchange(false)) return;
    acceptor_.request_stop();
    if (acceptor_.joinable()) acceptor_.join();
    std::map<std::uint64_t, std::jthread> conns;
    {
        std::lock_guard lock(mu_);
        for (auto& [id, thread] : connections_) thread.request_stop();
        for (auto& [id, fd] : connection_fds_) ::shutdown(fd, SHUT_RDWR);
        conns.swap(connections_);
    }
    conns.clear();  // joins
    {
        std::lock_guard lock(mu_);
        connection_fds_.clear();
        finished_.clear();
    }
    listener_.close();
}

void FrameServer::reap_finished() {
    std::vector<std::jthread> done;
    {
        std::lock_guard lock(mu_);
        for (const auto id : finished_) {
            auto it = connections_.find(id);
            if (it != connections_.end()) {
                done.push_back(std::move(it->second));
                connections_.erase(it);
            }
        }
        finished_.clear();
    }
}

void FrameServer::accept_loop(std::stop_token stop) {
    while (!stop.stop_requested()) {
        pollfd pfd{listener_.fd(), POLLIN, 0};
        const int rc = ::poll(&pfd, 1, kPollSliceMs);
        reap_finished();
        if (rc <= 0) continue;
        const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
        if (fd < 0) continue;
        std::lock_guard lock(mu_);
        const std::uint64_t id = next_id_++;
        connection_fds_[id] = fd;
        connections_.emplace(id, std::jthread([this, id, fd](std::stop_token s) { serve_connection(id, fd, s); }));
    }
}

void FrameServer::serve_connection(std::uint64_t id, int fd, std::stop_token stop) {
    Socket socket(fd);
    FrameReader reader;
    std::array<std::uint8_t, 16 * 1024> buf{};
    try {
        while (!stop.stop_requested()) {
            pollfd pfd{fd, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, kPollSliceMs);
            if (rc == 0) continue;
            if (rc < 0) {
                if (errno == EINTR) continue;
                break;
            }
            const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
            if (n == 0) break;
            if (n < 0) {
                if (errno == EAGAIN || errno == EINTR) continue;
                break;
            }
            reader.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
            bool closing = false;
            while (!closing) {
                std::optional<Message> request;
                try {
                    request = reader.next();
                } catch (const ProtocolViolation& e) {
                    const auto frame = encode_frame(ProtocolError{e.what()});
                    send_all(socket, frame, SteadyClock::now() + kWriteTimeout);
                    closing = true;
                    break;
                }
                if (!request) break;
                for (const auto& reply : handler_(*request, stop)) {
                    if (stop.stop_requested()) break;
                    send_all(socket, encode_frame(reply), SteadyClock::now() + kWriteTimeout);
                }
            }
            if (closing) break;
        }
    } catch (const std::exception&) {
        // peer went away mid-reply or the handler failed; drop the connection
    }
    std::lock_guard lock(mu_);
    connection_fds_.erase(id);
    finished_.push_back(id);
    // socket closes here, after the fd has been removed from the shutdown list
}

}  // namespace meshscape::protocol
