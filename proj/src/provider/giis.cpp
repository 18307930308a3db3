#include "meshscape/provider/giis.hpp"

#include <iostream>

#include "meshscape/protocol/client.hpp"
#include "meshscape/util/parallel.hpp"

namespace meshscape::provider {

bool GiisRegistry::register_member(GiisRegistration registration) {
    if (registration.ttl_seconds <= 0 || registration.dn.empty()) return false;
    if (registration.port < 1 || registration.port > 65535 || registration.address.empty()) return false;
    std::lock_guard lock(mu_);
    const std::string key = registration.dn.str();
    members_.insert_or_assign(key, std::move(registration));
    return true;
}

std::vector<protocol::Dn> GiisRegistry::expire(RegistryTime now) {
    std::vector<protocol::Dn> evicted;
    std::lock_guard lock(mu_);
    for (auto it = members_.begin(); it != members_.end();) {
        if (it->second.expires_at() < now) {
            evicted.push_back(it->second.dn);
            it = members_.erase(it);
        } else {
            ++it;
        }
    }
    return evicted;
}

std::vector<GiisRegistration> GiisRegistry::members(RegistryTime now) const {
    std::vector<GiisRegistration> out;
    std::lock_guard lock(mu_);
    for (const auto& [key, reg] : members_) {
        if (!(reg.expires_at() < now)) out.push_back(reg);
    }
    return out;
}

std::size_t GiisRegistry::size() const {
    std::lock_guard lock(mu_);
    return members_.size();
}

FanoutResult giis_search(const GiisRegistry& registry, const protocol::SearchRequest& request,
                         std::chrono::milliseconds timeout, RegistryTime now) {
    const auto members = registry.members(now);
    const auto member_timeout = std::max(std::chrono::milliseconds(1), timeout - timeout / 10);

    struct Slot {
        std::vector<protocol::Entry> entries;
        std::string failure;
        bool unreachable = false;
    };
    std::vector<Slot> slots(members.size());

    util::parallel_for(members.size(), kMaxFanout, [&](std::size_t i) {
        const auto& m = members[i];
        const protocol::Endpoint endpoint{m.address, static_cast<std::uint16_t>(m.port)};
        try {
            slots[i].entries = protocol::client_search(endpoint, request, member_timeout);
        } catch (const protocol::RemoteError& e) {
            slots[i].failure = m.dn.str() + ": " + e.what();
        } catch (const std::exception& e) {
            slots[i].failure = m.dn.str() + ": " + e.what();
            slots[i].unreachable = true;
        }
    });

    FanoutResult result;
    result.members = members.size();
    for (auto& slot : slots) {
        if (!slot.failure.empty()) {
            std::clog << "giis: member failed: " << slot.failure << '\n';
            result.failures.push_back(std::move(slot.failure));
        }
        if (slot.unreachable) ++result.unreachable;
        std::move(slot.entries.begin(), slot.entries.end(), std::back_inserter(result.entries));
    }
    return result;
}

}  // namespace meshscape::provider
