#include "meshscape/query/query.hpp"

#include <algorithm>

#include "meshscape/util/strings.hpp"

namespace meshscape::query {

namespace {

void add_unique(protocol::Entry& entry, const std::string& name, const std::string& value) {
    auto& values = entry.attributes[util::to_lower(name)];
    if (std::find(values.begin(), values.end(), value) == values.end()) values.push_back(value);
}

protocol::Dn root_of(const core::Location& location) {
    const protocol::Entry* root = nullptr;
    for (const auto& e : location.attributes) {
        if (!root || e.dn.depth() < root->dn.depth()) root = &e;
    }
    if (root) return root->dn;
    return protocol::Dn({{"hn", location.address}, {"o", "grid"}});
}

}  // namespace

protocol::Entry flatten(const core::Location& location) {
    protocol::Entry flat{root_of(location), {}};
    for (const auto& entry : location.attributes) {
        for (const auto& [name, values] : entry.attributes) {
            for (const auto& v : values) add_unique(flat, name, v);
        }
    }
    add_unique(flat, "name", location.name);
    if (!location.country.empty()) add_unique(flat, "country", location.country);
    add_unique(flat, "status", core::status_token(location.status));
    return flat;
}

std::vector<ResourceMatch> query(const core::Snapshot& snapshot, const protocol::Filter& filter,
                                 const std::optional<std::vector<std::string>>& projection) {
    std::vector<ResourceMatch> rows;
    rows.reserve(snapshot.locations.size());
    for (const auto& loc : snapshot.locations) {
        const protocol::Entry flat = flatten(loc);
        ResourceMatch row{loc.id, loc.name, loc.status, protocol::match_entry(flat, filter), {}};
        if (row.matched && projection) {
            for (const auto& name : *projection) {
                if (const auto* values = flat.find(name)) row.projected[util::to_lower(name)] = *values;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace meshscape::query
