#pragma once

#include <optional>
#include <string>
#include <vector>

#include "meshscape/core/location.hpp"
#include "meshscape/protocol/filter.hpp"

namespace meshscape::query {

struct ResourceMatch {
    std::string id;
    std::string name;
    core::Status status = core::Status::Unknown;
    bool matched = false;
    protocol::AttributeMap projected;  // only on matched rows, keys within the projection

    bool operator==(const ResourceMatch&) const = default;
};

// Merges a location's cached entries into one entry keyed by its root dn and
// adds the synthetic `name`, `country` and `status` attributes. Colliding
// attributes become multi-valued; exact duplicate values are kept once.
protocol::Entry flatten(const core::Location& location);

// One row per location, in snapshot order. Runs over the cache only.
std::vector<ResourceMatch> query(const core::Snapshot& snapshot, const protocol::Filter& filter,
                                 const std::optional<std::vector<std::string>>& projection = std::nullopt);

}  // namespace meshscape::query
