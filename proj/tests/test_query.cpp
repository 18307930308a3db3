#include <doctest.h>

#include "meshscape/provider/profile.hpp"
#include "meshscape/query/query.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/match_oracle.hpp"

using namespace meshscape;
using core::Status;
namespace mt = meshscape::testing;

namespace {

core::Location location(const std::string& id, Status status, std::vector<protocol::Entry> entries) {
    core::Location loc;
    loc.id = id;
    loc.name = "Site " + id;
    loc.address = id + ".example.org";
    loc.country = id == "a" ? "Australia" : "";
    loc.status = status;
    loc.attributes = std::move(entries);
    return loc;
}

// Independent flattening: a plain union of lowercased names over every entry.
mt::OracleEntry oracle_flatten(const core::Location& loc) {
    mt::OracleEntry out;
    auto add = [&](const std::string& name, const std::string& value) {
        auto& values = out[mt::oracle_lower(name)];
        if (std::find(values.begin(), values.end(), value) == values.end()) values.push_back(value);
    };
    for (const auto& e : loc.attributes) {
        for (const auto& [name, values] : e.attributes) {
            for (const auto& v : values) add(name, v);
        }
    }
    add("name", loc.name);
    if (!loc.country.empty()) add("country", loc.country);
    const char* token[] = {"unknown", "up", "down", "stale"};
    add("status", token[static_cast<int>(loc.status)]);
    return out;
}

mt::OracleFilter random_query(mt::Rng& rng, int depth) {
    using F = mt::OracleFilter;
    static const std::vector<std::string> attrs = {"os-name", "cpu-count", "status", "load-one", "name",
                                                   "country", "hn",        "fs-free", "no-such"};
    static const std::vector<std::string> values = {"Linux", "linux", "FreeBSD", "4",  "8",       "0.5",
                                                    "up",    "DOWN",  "stale",   "Site a", "Australia"};
    static const std::vector<std::string> patterns = {"Lin*", "*BSD", "*", "Site*a", "*u*", "S*e*"};
    if (depth > 0 && mt::pick(rng, 3) == 0) {
        const auto kind = mt::pick(rng, 3);
        if (kind == 2) return F{F::Not, "", "", "", {random_query(rng, depth - 1)}};
        F f{kind == 0 ? F::And : F::Or, "", "", "", {}};
        const std::size_t n = 1 + mt::pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i) f.kids.push_back(random_query(rng, depth - 1));
        return f;
    }
    const std::string attr = mt::pick_from(rng, attrs);
    switch (mt::pick(rng, 5)) {
        case 0: return F{F::Present, attr, "", "", {}};
        case 1: return F{F::Ge, attr, mt::pick_from(rng, values), "", {}};
        case 2: return F{F::Le, attr, mt::pick_from(rng, values), "", {}};
        case 3: return F{F::Sub, attr, "", mt::pick_from(rng, patterns), {}};
        default: return F{F::Eq, attr, mt::pick_from(rng, values), "", {}};
    }
}

core::Snapshot random_snapshot(mt::Rng& rng) {
    static const std::vector<std::string> systems = {"Linux", "FreeBSD", "Solaris"};
    core::Snapshot snap;
    snap.version = 1 + mt::pick(rng, 100);
    const std::size_t n = mt::pick(rng, 7);
    for (std::size_t i = 0; i < n; ++i) {
        const auto status = static_cast<Status>(mt::pick(rng, 4));
        std::vector<protocol::Entry> entries;
        if (status != Status::Unknown || mt::pick(rng, 4) == 0) {
            auto profile = mt::fixture_profile("n" + std::to_string(i), rng(), 1 + static_cast<std::int64_t>(mt::pick(rng, 16)));
            profile.os_name = mt::pick_from(rng, systems);
            entries = provider::collect(profile, mt::pick(rng, 50));
        }
        snap.locations.push_back(location(std::string(1, static_cast<char>('a' + i)), status, std::move(entries)));
    }
    return snap;
}

}  // namespace

TEST_CASE("flatten with no cached data has only synthetic attributes") {
    const auto flat = query::flatten(location("a", Status::Down, {}));
    CHECK(flat.attributes.size() == 3);
    CHECK(*flat.find("status") == std::vector<std::string>{"down"});
    CHECK(*flat.find("name") == std::vector<std::string>{"Site a"});
    CHECK(*flat.find("country") == std::vector<std::string>{"Australia"});
    CHECK(flat.dn.str() == "hn=a.example.org, o=grid");
    CHECK(query::flatten(location("b", Status::Unknown, {})).attributes.size() == 2);
}

TEST_CASE("flatten of a cached tree is the union of its entries") {
    const auto profile = mt::fixture_profile("alpha.example.org", 3, 8);
    const auto entries = provider::collect(profile, 0);
    REQUIRE(entries.size() == 7);
    const auto loc = location("a", Status::Up, entries);
    const auto flat = query::flatten(loc);
    CHECK(flat.dn.str() == "hn=alpha.example.org, o=grid");

    const auto expected = oracle_flatten(loc);
    CHECK(flat.attributes.size() == expected.size());
    for (const auto& [name, values] : expected) {
        CAPTURE(name);
        REQUIRE(flat.find(name));
        CHECK(*flat.find(name) == values);
    }
    CHECK(*flat.find("cpu-count") == std::vector<std::string>{"8"});
    CHECK(*flat.find("os-name") == std::vector<std::string>{"Linux"});
    CHECK(flat.find("load-one"));
    CHECK(*flat.find("status") == std::vector<std::string>{"up"});
}

TEST_CASE("status filter over a mixed snapshot") {
    core::Snapshot snap;
    snap.locations = {location("a", Status::Up, {}), location("b", Status::Down, {}), location("c", Status::Up, {})};
    const auto rows = query::query(snap, protocol::parse_filter("(status=up)"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].matched);
    CHECK_FALSE(rows[1].matched);
    CHECK(rows[2].matched);
    CHECK(rows[1].id == "b");
    CHECK(rows[1].status == Status::Down);
    CHECK(query::query(snap, protocol::parse_filter("(STATUS=UP)")) == rows);
    CHECK(query::query(core::Snapshot{}, protocol::parse_filter("(status=up)")).empty());
}

TEST_CASE("projection applies to matched rows only") {
    const auto entries = provider::collect(mt::fixture_profile("alpha", 3, 8), 0);
    core::Snapshot snap;
    snap.locations = {location("a", Status::Up, entries), location("b", Status::Down, entries)};
    const auto rows = query::query(snap, protocol::parse_filter("(status=up)"),
                                   std::vector<std::string>{"CPU-Count", "os-name", "no-such"});
    CHECK(rows[0].projected.size() == 2);
    CHECK(rows[0].projected.at("cpu-count") == std::vector<std::string>{"8"});
    CHECK(rows[1].projected.empty());
    CHECK(query::query(snap, protocol::parse_filter("(status=up)"))[0].projected.empty());
}

TEST_CASE("query agrees with an independent oracle over random snapshots") {
    mt::Rng rng(2024);
    int disagreements = 0;
    int matched_rows = 0;
    int rows_total = 0;
    const auto fixed = protocol::parse_filter("(&(os-name=Linux)(cpu-count>=4))");
    const mt::OracleFilter fixed_oracle{mt::OracleFilter::And, "", "", "",
                                        {{mt::OracleFilter::Eq, "os-name", "Linux", "", {}},
                                         {mt::OracleFilter::Ge, "cpu-count", "4", "", {}}}};
    for (int i = 0; i < 200; ++i) {
        const core::Snapshot snap = random_snapshot(rng);
        const mt::OracleFilter of = i % 2 ? random_query(rng, 3) : fixed_oracle;
        const protocol::Filter f = i % 2 ? protocol::parse_filter(of.text()) : fixed;
        const auto rows = query::query(snap, f);
        REQUIRE(rows.size() == snap.locations.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const bool expect = mt::oracle_match(oracle_flatten(snap.locations[r]), of);
            if (rows[r].matched != expect || rows[r].id != snap.locations[r].id) ++disagreements;
            matched_rows += expect;
            ++rows_total;
        }
        CHECK(query::query(snap, f) == rows);
    }
    CHECK(disagreements == 0);
    // both outcomes are exercised
    CHECK(matched_rows > 0);
    CHECK(matched_rows < rows_total);
}

TEST_CASE("conjunction never widens the matched set") {
    mt::Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        const core::Snapshot snap = random_snapshot(rng);
        const auto f = random_query(rng, 2);
        const auto g = random_query(rng, 2);
        const auto narrow = query::query(snap, protocol::parse_filter("(&" + f.text() + g.text() + ")"));
        const auto wide = query::query(snap, protocol::parse_filter(f.text()));
        for (std::size_t r = 0; r < narrow.size(); ++r) {
            if (narrow[r].matched) CHECK(wide[r].matched);
        }
    }
}
