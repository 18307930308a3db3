#include "meshscape/portal/json.hpp"

#include <ctime>
#include <iomanip>
#include <sstream>

namespace meshscape::portal {

std::string format_timestamp(core::Timestamp t) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << frac << 'Z';
    return out.str();
}

json optional_timestamp(const std::optional<core::Timestamp>& t) { return t ? json(format_timestamp(*t)) : json(nullptr); }

json entry_json(const protocol::Entry& entry) {
    json attrs = json::object();
    for (const auto& [name, values] : entry.attributes) attrs[name] = values;
    return {{"dn", entry.dn.str()}, {"attributes", std::move(attrs)}};
}

json policy_json(const core::RefreshPolicy& policy) {
    return {{"period_ms", policy.period.count()},
            {"timeout_ms", policy.per_resource_timeout.count()},
            {"staleness_factor", policy.staleness_factor},
            {"max_parallel_polls", policy.max_parallel_polls}};
}

json location_summary(const core::Location& loc) {
    return {{"id", loc.id},
            {"name", loc.name},
            {"address", loc.address},
            {"port", loc.port},
            {"position", {{"x", loc.position.x}, {"y", loc.position.y}}},
            {"country", loc.country},
            {"status", std::string(core::to_string(loc.status))},
            {"last_success", optional_timestamp(loc.last_success)},
            {"last_attempt", optional_timestamp(loc.last_attempt)},
            {"last_error", loc.last_error ? json(*loc.last_error) : json(nullptr)},
            {"entry_count", loc.attributes.size()}};
}

json location_detail(const core::Location& loc) {
    json out = location_summary(loc);
    json entries = json::array();
    for (const auto& e : loc.attributes) entries.push_back(entry_json(e));
    out["entries"] = std::move(entries);
    return out;
}

json snapshot_json(const core::Snapshot& snapshot) {
    json resources = json::array();
    for (const auto& loc : snapshot.locations) resources.push_back(location_summary(loc));
    return {{"version", snapshot.version},
            {"taken_at", format_timestamp(snapshot.taken_at)},
            {"resources", std::move(resources)}};
}

json match_json(const query::ResourceMatch& match) {
    json projected = json::object();
    for (const auto& [name, values] : match.projected) projected[name] = values;
    return {{"id", match.id},
            {"name", match.name},
            {"status", std::string(core::to_string(match.status))},
            {"matched", match.matched},
            {"projected", std::move(projected)}};
}

}  // namespace meshscape::portal
