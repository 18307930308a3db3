#include "meshscape/portal/cli.hpp"

#include <algorithm>

#include <httplib.h>

#include "meshscape/config/config.hpp"
#include "meshscape/core/manager.hpp"
#include "meshscape/portal/json.hpp"
#include "meshscape/protocol/client.hpp"
#include "meshscape/protocol/filter.hpp"
#include "meshscape/query/query.hpp"
#include "meshscape/util/strings.hpp"

namespace meshscape::portal {

namespace {

using Row = std::vector<std::string>;

void print_table(std::ostream& out, const Row& header, const std::vector<Row>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    auto line = [&](const Row& r) {
        std::string text;
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < r.size() ? r[c] : "";
            text += cell;
            if (c + 1 < width.size()) text += std::string(width[c] - cell.size() + 2, ' ');
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        out << text << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
}

std::string join(const std::vector<std::string>& values, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? sep : "") + values[i];
    return s;
}

// A manager with one completed poll round over a portal's resources.
std::unique_ptr<core::TestbedManager> polled_portal(const std::filesystem::path& dir, std::chrono::milliseconds timeout) {
    const config::TestbedConfig cfg = config::load_config(dir / config::kConfigFileName);
    core::RefreshPolicy policy = core::RefreshPolicy::with_overrides({}, cfg.refresh);
    policy.per_resource_timeout = timeout;
    policy.period = std::max(policy.period, timeout + std::chrono::milliseconds(1));
    auto mgr = std::make_unique<core::TestbedManager>(cfg, policy);
    mgr->refresh_now();
    return mgr;
}

int query_endpoint(const QueryOptions& o, const protocol::Filter& filter, std::ostream& out, std::ostream& err) {
    protocol::SearchRequest req;
    req.filter = filter;
    req.scope = o.scope;
    req.attrs = o.projection;
    try {
        req.base = protocol::Dn::parse(o.base);
    } catch (const std::exception& e) {
        err << "error: bad base dn: " << e.what() << '\n';
        return kExitFailure;
    }
    try {
        const protocol::SearchReply reply = protocol::client_search_reply(*o.endpoint, req, o.timeout);
        for (const auto& e : reply.entries) {
            out << "dn: " << e.dn.str() << '\n';
            for (const auto& [name, values] : e.attributes) {
                for (const auto& v : values) out << name << ": " << v << '\n';
            }
            out << '\n';
        }
        out << "# " << reply.entries.size() << (reply.entries.size() == 1 ? " entry" : " entries");
        if (!reply.diagnostic.empty()) out << ", " << reply.diagnostic;
        out << '\n';
        return kExitOk;
    } catch (const protocol::Unreachable& e) {
        err << "error: " << o.endpoint->str() << " unreachable: " << e.what() << '\n';
        return kExitUnreachable;
    } catch (const protocol::Timeout& e) {
        err << "error: " << o.endpoint->str() << " timed out: " << e.what() << '\n';
        return kExitUnreachable;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int query_portal(const QueryOptions& o, const protocol::Filter& filter, std::ostream& out, std::ostream& err) {
    std::unique_ptr<core::TestbedManager> mgr;
    try {
        mgr = polled_portal(*o.portal_dir, o.timeout);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    const core::SnapshotPtr snap = mgr->snapshot();
    const auto matches = query::query(*snap, filter, o.projection.empty() ? std::nullopt : std::optional(o.projection));
    Row header = {"NAME", "STATUS", "MATCHED"};
    for (const auto& p : o.projection) header.push_back(p);
    std::vector<Row> rows;
    std::size_t matched = 0;
    for (const auto& m : matches) {
        Row r = {m.name, std::string(core::to_string(m.status)), m.matched ? "yes" : "no"};
        if (m.matched) ++matched;
        for (const auto& p : o.projection) {
            auto it = m.projected.find(util::to_lower(p));
            r.push_back(it == m.projected.end() ? "" : join(it->second, ","));
        }
        rows.push_back(std::move(r));
    }
    print_table(out, header, rows);
    out << "# " << matched << " of " << matches.size() << " matched\n";
    return kExitOk;
}

}  // namespace

std::string caret_diagnostic(const std::string& text, std::size_t offset) {
    return "  " + text + "\n  " + std::string(std::min(offset, text.size()), ' ') + "^";
}

int run_query(const QueryOptions& o, std::ostream& out, std::ostream& err) {
    protocol::Filter filter;
    try {
        filter = protocol::parse_filter(o.filter);
    } catch (const protocol::SyntaxError& e) {
        err << "error: bad filter at offset " << e.offset() << ": expected " << e.expected() << '\n'
            << caret_diagnostic(o.filter, e.offset()) << '\n';
        return kExitBadFilter;
    }
    if (o.endpoint.has_value() == o.portal_dir.has_value()) {
        err << "error: give exactly one of a portal directory or --endpoint\n";
        return kExitFailure;
    }
    return o.endpoint ? query_endpoint(o, filter, out, err) : query_portal(o, filter, out, err);
}

int run_status(const StatusOptions& o, std::ostream& out, std::ostream& err) {
    if (o.url.has_value() == o.portal_dir.has_value()) {
        err << "error: give exactly one of a portal directory or --url\n";
        return kExitFailure;
    }
    json snapshot;
    if (o.portal_dir) {
        try {
            snapshot = snapshot_json(*polled_portal(*o.portal_dir, o.timeout)->snapshot());
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return kExitFailure;
        }
    } else {
        httplib::Client client(*o.url);
        const auto secs = std::max<long>(1, static_cast<long>(o.timeout.count() / 1000));
        client.set_connection_timeout(secs, 0);
        client.set_read_timeout(secs, 0);
        auto res = client.Get("/api/resources");
        if (!res) {
            err << "error: " << *o.url << " unreachable: " << httplib::to_string(res.error()) << '\n';
            return kExitUnreachable;
        }
        if (res->status != 200) {
            err << "error: " << *o.url << " answered " << res->status << ": " << res->body << '\n';
            return kExitFailure;
        }
        snapshot = json::parse(res->body, nullptr, false);
        if (snapshot.is_discarded() || !snapshot.contains("resources")) {
            err << "error: " << *o.url << " returned a malformed snapshot\n";
            return kExitFailure;
        }
    }
    std::vector<Row> rows;
    for (const auto& r : snapshot["resources"]) {
        auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : std::string("-"); };
        rows.push_back({r.value("id", ""), r.value("name", ""),
                        r.value("address", "") + ":" + std::to_string(r.value("port", 0)), r.value("status", ""),
                        text(r["last_success"]), text(r["last_error"])});
    }
    print_table(out, {"ID", "NAME", "ENDPOINT", "STATUS", "LAST_SUCCESS", "LAST_ERROR"}, rows);
    out << "# version " << snapshot.value("version", 0) << ", " << rows.size() << " resources\n";
    return kExitOk;
}

}  // namespace meshscape::portal
