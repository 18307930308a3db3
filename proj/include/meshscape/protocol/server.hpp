#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "meshscape/protocol/message.hpp"
#include "meshscape/protocol/net.hpp"

namespace meshscape::protocol {

// Accepts framed connections and answers each connection's requests in order,
// one thread per connection. A malformed frame gets a ProtocolError reply and
// the connection is closed.
class FrameServer {
public:
    using Handler = std::function<std::vector<Message>(const Message&, std::stop_token)>;

    FrameServer(std::string host, std::uint16_t port, Handler handler);
    ~FrameServer();

    FrameServer(const FrameServer&) = delete;
    FrameServer& operator=(const FrameServer&) = delete;

    // Binds and starts accepting. Throws if the port cannot be bound.
    void start();
    void stop();

    bool running() const { return running_; }
    // Bound port; valid after start().
    std::uint16_t port() const { return bound_port_; }

private:
    void accept_loop(std::stop_token stop);
    void serve_connection(std::uint64_t id, int fd, std::stop_token stop);
    void reap_finished();

    std::string host_;
    std::uint16_t requested_port_;
    std::uint16_t bound_port_ = 0;
    Handler handler_;
    Socket listener_;
    std::atomic<bool> running_{false};
    std::jthread acceptor_;

    std::mutex mu_;
    std::uint64_t next_id_ = 0;
    std::map<std::uint64_t, std::jthread> connections_;
    std::map<std::uint64_t, int> connection_fds_;
    std::vector<std::uint64_t> finished_;
};

}  // namespace meshscape::protocol
