#include "meshscape/provider/servers.hpp"

#include <iostream>

#include "meshscape/protocol/client.hpp"

namespace meshscape::provider {

using namespace protocol;

namespace {

// Sleeps for `d` unless stop is requested first; returns false if stopped.
bool sleep_for(std::chrono::milliseconds d, std::stop_token stop) {
    std::mutex mu;
    std::condition_variable_any cv;
    std::unique_lock lock(mu);
    return !cv.wait_for(lock, stop, d, [] { return false; }) && !stop.stop_requested();
}

std::vector<Message> search_replies(const SearchRequest& req, const SearchOutcome& outcome) {
    std::vector<Message> replies;
    replies.reserve(outcome.entries.size() + 1);
    for (const auto& e : outcome.entries) replies.emplace_back(SearchEntry{req.msg_id, e});
    replies.emplace_back(SearchDone{req.msg_id, outcome.code, outcome.diagnostic});
    return replies;
}

}  // namespace

AgentServer::AgentServer(AgentOptions options)
    : options_(std::move(options)),
      server_(options_.bind_host, options_.port,
              [this](const Message& m, std::stop_token stop) { return handle(m, stop); }),
      dynamic_(options_.profile) {
    options_.profile.validate();
    published_ = std::make_shared<const GrisState>(GrisState::from(options_.profile, dynamic_));
}

AgentServer::~AgentServer() { stop(); }

void AgentServer::start() {
    server_.start();
    if (options_.tick_interval.count() > 0) {
        ticker_ = std::jthread([this](std::stop_token stop) { tick_loop(stop); });
    }
    if (options_.giis) {
        registrar_ = std::jthread([this](std::stop_token stop) { register_loop(stop); });
    }
}

void AgentServer::stop() {
    ticker_ = {};
    registrar_ = {};
    server_.stop();
}

std::shared_ptr<const GrisState> AgentServer::state() const {
    std::lock_guard lock(state_mu_);
    return published_;
}

void AgentServer::advance(std::uint64_t steps) {
    std::lock_guard lock(state_mu_);
    dynamic_.advance(steps);
    published_ = std::make_shared<const GrisState>(GrisState::from(options_.profile, dynamic_));
}

std::vector<Message> AgentServer::handle(const Message& request, std::stop_token stop) {
    if (const auto* search = std::get_if<SearchRequest>(&request)) {
        auto snapshot = state();
        if (options_.response_delay.count() > 0 && !sleep_for(options_.response_delay, stop)) return {};
        return search_replies(*search, serve_search(*snapshot, *search));
    }
    if (const auto* ping = std::get_if<Ping>(&request)) return {Pong{ping->nonce}};
    return {ProtocolError{"agent accepts only search and ping"}};
}

void AgentServer::tick_loop(std::stop_token stop) {
    while (sleep_for(options_.tick_interval, stop)) advance();
}

void AgentServer::register_loop(std::stop_token stop) {
    const auto interval = std::max<std::chrono::milliseconds>(
        std::chrono::milliseconds(200), std::chrono::seconds(options_.ttl_seconds) / 3);
    do {
        const Register reg{root_dn(options_.profile), options_.advertise_host, port(), options_.ttl_seconds};
        try {
            if (!client_register(*options_.giis, reg, std::chrono::seconds(2))) {
                std::clog << "agent: registration rejected by " << options_.giis->str() << '\n';
            }
        } catch (const std::exception& e) {
            std::clog << "agent: registration with " << options_.giis->str() << " failed: " << e.what() << '\n';
        }
    } while (sleep_for(interval, stop));
}

GiisServer::GiisServer(GiisOptions options)
    : options_(std::move(options)),
      server_(options_.bind_host, options_.port, [this](const Message& m, std::stop_token) { return handle(m); }) {}

GiisServer::~GiisServer() { stop(); }

void GiisServer::start() {
    server_.start();
    expirer_ = std::jthread([this](std::stop_token stop) {
        while (sleep_for(options_.expire_interval, stop)) {
            for (const auto& dn : registry_.expire(RegistryClock::now())) {
                std::clog << "giis: registration expired: " << dn.str() << '\n';
            }
        }
    });
}

void GiisServer::stop() {
    expirer_ = {};
    server_.stop();
}

std::vector<Message> GiisServer::handle(const Message& request) {
    if (const auto* reg = std::get_if<Register>(&request)) {
        GiisRegistration r{reg->dn, reg->address, reg->port, reg->ttl_seconds, RegistryClock::now()};
        return {RegisterAck{registry_.register_member(std::move(r))}};
    }
    if (const auto* search = std::get_if<SearchRequest>(&request)) {
        auto result = giis_search(registry_, *search, options_.search_timeout);
        SearchOutcome outcome{std::move(result.entries), result_code::kSuccess, result.diagnostic()};
        return search_replies(*search, outcome);
    }
    if (const auto* ping = std::get_if<Ping>(&request)) return {Pong{ping->nonce}};
    return {ProtocolError{"giis accepts only register, search and ping"}};
}

}  // namespace meshscape::provider
