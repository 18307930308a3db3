#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "meshscape/protocol/net.hpp"
#include "meshscape/protocol/server.hpp"
#include "meshscape/provider/giis.hpp"
#include "meshscape/provider/gris.hpp"

namespace meshscape::provider {

struct AgentOptions {
    ResourceProfile profile;
    std::string bind_host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 = ephemeral
    std::chrono::milliseconds tick_interval{0};  // 0 = dynamic state frozen
    std::chrono::milliseconds response_delay{0};
    std::optional<protocol::Endpoint> giis;
    std::int64_t ttl_seconds = 30;
    std::string advertise_host = "127.0.0.1";
};

// A GRIS: publishes one resource's entry tree over the directory protocol.
class AgentServer {
public:
    explicit AgentServer(AgentOptions options);
    ~AgentServer();

    void start();
    void stop();

    std::uint16_t port() const { return server_.port(); }
    protocol::Endpoint endpoint() const { return {options_.bind_host, port()}; }

    std::shared_ptr<const GrisState> state() const;
    void advance(std::uint64_t steps = 1);

private:
    std::vector<protocol::Message> handle(const protocol::Message& request, std::stop_token stop);
    void tick_loop(std::stop_token stop);
    void register_loop(std::stop_token stop);

    AgentOptions options_;
    protocol::FrameServer server_;

    mutable std::mutex state_mu_;
    DynamicState dynamic_;
    std::shared_ptr<const GrisState> published_;

    std::jthread ticker_;
    std::jthread registrar_;
};

struct GiisOptions {
    std::string bind_host = "127.0.0.1";
    std::uint16_t port = 0;
    std::chrono::milliseconds expire_interval{1000};
    std::chrono::milliseconds search_timeout{5000};
};

// A GIIS: accepts registrations and fans searches out to live members.
class GiisServer {
public:
    explicit GiisServer(GiisOptions options);
    ~GiisServer();

    void start();
    void stop();

    std::uint16_t port() const { return server_.port(); }
    protocol::Endpoint endpoint() const { return {options_.bind_host, port()}; }
    GiisRegistry& registry() { return registry_; }

private:
    std::vector<protocol::Message> handle(const protocol::Message& request);

    GiisOptions options_;
    GiisRegistry registry_;
    protocol::FrameServer server_;
    std::jthread expirer_;
};

}  // namespace meshscape::provider
