#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "meshscape/config/config.hpp"
#include "meshscape/core/location.hpp"
#include "meshscape/query/query.hpp"

namespace meshscape::portal {

using nlohmann::json;

// ISO 8601 UTC with millisecond precision, e.g. 2024-03-01T12:00:00.250Z.
std::string format_timestamp(core::Timestamp t);
json optional_timestamp(const std::optional<core::Timestamp>& t);

json entry_json(const protocol::Entry& entry);
json policy_json(const core::RefreshPolicy& policy);

// Status and freshness only; no attribute entries.
json location_summary(const core::Location& loc);
// Summary plus every cached entry.
json location_detail(const core::Location& loc);

json snapshot_json(const core::Snapshot& snapshot);
json match_json(const query::ResourceMatch& match);

}  // namespace meshscape::portal
