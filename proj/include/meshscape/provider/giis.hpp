#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "meshscape/protocol/message.hpp"

namespace meshscape::provider {

using RegistryClock = std::chrono::steady_clock;
using RegistryTime = RegistryClock::time_point;

struct GiisRegistration {
    protocol::Dn dn;
    std::string address;
    int port = 0;
    std::int64_t ttl_seconds = 0;
    RegistryTime registered_at{};

    RegistryTime expires_at() const { return registered_at + std::chrono::seconds(ttl_seconds); }
};

// TTL-bounded membership keyed by dn text. All operations are linearizable.
class GiisRegistry {
public:
    // Upsert; false for ttl <= 0, an empty dn, or an invalid port.
    bool register_member(GiisRegistration registration);
    // Removes registrations with registered_at + ttl < now.
    std::vector<protocol::Dn> expire(RegistryTime now);
    // Unexpired members at `now`, in dn order.
    std::vector<GiisRegistration> members(RegistryTime now) const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, GiisRegistration> members_;
};

inline constexpr std::size_t kMaxFanout = 16;

struct FanoutResult {
    std::vector<protocol::Entry> entries;
    std::size_t members = 0;
    std::size_t unreachable = 0;
    std::vector<std::string> failures;

    std::string diagnostic() const { return "unreachable=" + std::to_string(unreachable); }
};

// Sends the request to every live member, at most kMaxFanout at once, and
// concatenates their answers in member order. Members that fail or exceed 90%
// of `timeout` contribute nothing.
FanoutResult giis_search(const GiisRegistry& registry, const protocol::SearchRequest& request,
                         std::chrono::milliseconds timeout, RegistryTime now = RegistryClock::now());

}  // namespace meshscape::provider
