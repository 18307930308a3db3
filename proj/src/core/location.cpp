#include "meshscape/core/location.hpp"

#include <stdexcept>

#include "meshscape/protocol/client.hpp"
#include "meshscape/util/strings.hpp"

namespace meshscape::core {

std::string_view to_string(Status status) {
    switch (status) {
        case Status::Unknown: return "UNKNOWN";
        case Status::Up: return "UP";
        case Status::Down: return "DOWN";
        case Status::Stale: return "STALE";
    }
    return "UNKNOWN";
}

std::string status_token(Status status) { return util::to_lower(to_string(status)); }

std::string_view to_string(PollErrorKind kind) {
    switch (kind) {
        case PollErrorKind::Unreachable: return "unreachable";
        case PollErrorKind::Timeout: return "timeout";
        case PollErrorKind::Remote: return "remote_error";
        case PollErrorKind::Protocol: return "protocol_violation";
    }
    return "unreachable";
}

Location Location::from_pin(const config::ResourcePin& pin) {
    Location loc;
    loc.id = pin.id;
    loc.name = pin.name;
    loc.address = pin.address;
    loc.port = pin.port;
    loc.position = {pin.x, pin.y};
    loc.country = pin.country;
    return loc;
}

config::ResourcePin Location::to_pin() const {
    return config::ResourcePin{id, name, address, port, position.x, position.y, country};
}

std::chrono::milliseconds RefreshPolicy::staleness_bound() const {
    return std::chrono::milliseconds(static_cast<std::int64_t>(staleness_factor * static_cast<double>(period.count())));
}

void RefreshPolicy::validate() const {
    if (per_resource_timeout.count() <= 0) throw std::invalid_argument("poll timeout must be positive");
    if (period <= per_resource_timeout) throw std::invalid_argument("poll period must exceed the poll timeout");
    if (!(staleness_factor >= 1.0)) throw std::invalid_argument("staleness factor must be at least 1");
    if (max_parallel_polls < 1) throw std::invalid_argument("max parallel polls must be positive");
}

RefreshPolicy RefreshPolicy::with_overrides(RefreshPolicy base, const config::RefreshOverrides& o) {
    if (o.period_ms) base.period = std::chrono::milliseconds(*o.period_ms);
    if (o.timeout_ms) base.per_resource_timeout = std::chrono::milliseconds(*o.timeout_ms);
    if (o.staleness_factor) base.staleness_factor = *o.staleness_factor;
    if (o.max_parallel_polls) base.max_parallel_polls = static_cast<int>(*o.max_parallel_polls);
    return base;
}

const Location* Snapshot::find(std::string_view id) const {
    for (const auto& loc : locations) {
        if (loc.id == id) return &loc;
    }
    return nullptr;
}

PollResult poll_resource(const Location& location, const RefreshPolicy& policy) {
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    };
    if (location.port < 1 || location.port > 65535) {
        return PollFailure{PollErrorKind::Unreachable, "invalid port", elapsed()};
    }
    protocol::SearchRequest request;
    request.base = {};
    request.scope = protocol::Scope::Sub;
    request.filter = protocol::Filter::presence("objectclass");
    try {
        const protocol::Endpoint endpoint{location.address, static_cast<std::uint16_t>(location.port)};
        auto entries = protocol::client_search(endpoint, request, policy.per_resource_timeout);
        return PollSuccess{std::move(entries), elapsed()};
    } catch (const protocol::Timeout& e) {
        return PollFailure{PollErrorKind::Timeout, e.what(), elapsed()};
    } catch (const protocol::RemoteError& e) {
        return PollFailure{PollErrorKind::Remote, e.what(), elapsed()};
    } catch (const protocol::ProtocolViolation& e) {
        return PollFailure{PollErrorKind::Protocol, e.what(), elapsed()};
    } catch (const std::exception& e) {
        return PollFailure{PollErrorKind::Unreachable, e.what(), elapsed()};
    }
}

Status classify_status(const std::optional<Timestamp>& last_success, const std::optional<Timestamp>& last_attempt,
                       Timestamp now, const RefreshPolicy& policy) {
    if (!last_attempt) return Status::Unknown;
    if (!last_success) return Status::Down;
    const bool fresh = now - *last_success <= policy.staleness_bound();
    const bool last_attempt_failed = *last_attempt != *last_success;
    if (fresh) return last_attempt_failed ? Status::Down : Status::Up;
    return Status::Stale;
}

}  // namespace meshscape::core
