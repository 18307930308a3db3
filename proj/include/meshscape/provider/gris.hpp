#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meshscape/protocol/message.hpp"
#include "meshscape/provider/profile.hpp"

namespace meshscape::provider {

// One resource's published entry tree at a single tick.
struct GrisState {
    ResourceProfile profile;
    std::uint64_t tick = 0;
    std::vector<protocol::Entry> entries;  // root first

    static GrisState at_tick(const ResourceProfile& profile, std::uint64_t tick);
    static GrisState from(const ResourceProfile& profile, const DynamicState& state);

    const protocol::Dn& root() const { return entries.front().dn; }
};

struct SearchOutcome {
    std::vector<protocol::Entry> entries;
    int code = protocol::result_code::kSuccess;
    std::string diagnostic;
};

// Scope selection over a DIT held as a flat entry list. An empty base
// stands for the tree's root entry.
SearchOutcome search_entries(std::span<const protocol::Entry> tree, const protocol::SearchRequest& request);

inline SearchOutcome serve_search(const GrisState& state, const protocol::SearchRequest& request) {
    return search_entries(state.entries, request);
}

}  // namespace meshscape::provider
