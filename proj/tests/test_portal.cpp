#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "meshscape/config/config.hpp"
#include "meshscape/query/query.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/portal_fixture.hpp"

using namespace meshscape;
using namespace std::chrono_literals;
using nlohmann::json;
namespace fs = std::filesystem;
namespace mt = meshscape::testing;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json pin_body(const std::string& id, int port, double x = 0.3, double y = 0.6) {
    return {{"id", id}, {"name", "Site " + id}, {"address", "127.0.0.1"}, {"port", port}, {"x", x}, {"y", y}};
}

// The resource list the API reports, reduced to the fields the config holds.
std::vector<config::ResourcePin> api_pins(const mt::LivePortal& p) {
    const auto r = p.get("/api/resources");
    REQUIRE(r.status == 200);
    std::vector<config::ResourcePin> out;
    for (const auto& item : r.body.at("resources")) {
        out.push_back({item.at("id"), item.at("name"), item.at("address"), item.at("port"),
                       item.at("position").at("x"), item.at("position").at("y"), item.at("country")});
    }
    return out;
}

std::string status_of(const mt::LivePortal& p, const std::string& id) {
    const auto r = p.get("/api/resources/" + id);
    return r.status == 200 ? r.body.at("status").get<std::string>() : "";
}

const std::string kPng = std::string("\x89PNG\r\n\x1a\n", 8) + std::string(64, '\x01');

}  // namespace

TEST_CASE("blank portal serves its testbed description and assets") {
    mt::LivePortal p;
    const auto t = p.get("/api/testbed");
    REQUIRE(t.status == 200);
    CHECK(t.body.at("name") == "Test Grid");
    CHECK(t.body.at("admin_enabled") == true);
    CHECK(t.body.at("version") == 1);
    CHECK(t.body.at("refresh").at("period_ms") == 300);
    const std::string map_url = t.body.at("map_url");
    const auto asset = p.client().Get(map_url);
    REQUIRE(asset);
    CHECK(asset->status == 200);
    CHECK(asset->body.find("<svg") != std::string::npos);

    const auto r = p.get("/api/resources");
    CHECK(r.status == 200);
    CHECK(r.body.at("resources").empty());
    CHECK(r.body.at("version") == 1);

    const auto index = p.client().Get("/");
    REQUIRE(index);
    CHECK(index->status == 200);
    CHECK(p.get("/api/nothing-here").status == 404);
    CHECK(p.get("/api/nothing-here").body.at("code") == "not_found");
}

TEST_CASE("admin endpoints need a configured token") {
    mt::LivePortal read_only(std::nullopt);
    CHECK(read_only.get("/api/testbed").body.at("admin_enabled") == false);
    const auto r = read_only.post("/api/resources", pin_body("a", 2135), true);
    CHECK(r.status == 403);
    CHECK(r.body.at("code") == "admin_disabled");
    CHECK(read_only.del("/api/resources/a").status == 403);

    mt::LivePortal p;
    CHECK(p.post("/api/resources", pin_body("a", 2135), false).status == 401);
    auto wrong = p.client().Post("/api/resources", {{"Authorization", "Bearer nope"}}, pin_body("a", 2135).dump(),
                                 "application/json");
    REQUIRE(wrong);
    CHECK(wrong->status == 401);
    CHECK(mt::to_reply(wrong).body.at("code") == "unauthorized");
    auto basic = p.client().Post("/api/resources", {{"Authorization", "secret"}}, "{}", "application/json");
    CHECK(basic->status == 401);
    CHECK(api_pins(p).empty());
}

TEST_CASE("adding pins persists them and the poller brings them up") {
    auto agent = mt::start_agent("alpha.example.org", 3);
    mt::LivePortal p;
    const auto created = p.post("/api/resources", pin_body("alpha", agent->port()), true);
    REQUIRE(created.status == 201);
    CHECK(created.body.at("id") == "alpha");
    CHECK(created.body.at("status") == "UNKNOWN");
    CHECK(created.body.at("version").get<int>() >= 2);

    const auto on_disk = config::load_config(p.service().config_path());
    CHECK(on_disk.resources == api_pins(p));
    CHECK(on_disk.name == "Test Grid");

    CHECK(mt::eventually([&] { return status_of(p, "alpha") == "UP"; }, 3s));
    const auto detail = p.get("/api/resources/alpha");
    CHECK(detail.body.at("entry_count") == 7);
    CHECK(detail.body.at("entries").size() == 7);
    CHECK(detail.body.at("last_success").is_string());
    CHECK(detail.body.at("last_error").is_null());
    CHECK(p.get("/api/resources/ghost").status == 404);
    CHECK(p.get("/api/resources/ghost").body.at("code") == "unknown_resource");

    const auto blank = p.post("/api/resources", json::object(), true);
    REQUIRE(blank.status == 201);
    CHECK(blank.body.at("position") == json{{"x", 0.5}, {"y", 0.5}});
    CHECK(config::load_config(p.service().config_path()).resources == api_pins(p));
}

TEST_CASE("edits and removals reach the config file and the API together") {
    mt::LivePortal p;
    REQUIRE(p.post("/api/resources", pin_body("a", 2301), true).status == 201);
    REQUIRE(p.post("/api/resources", pin_body("b", 2302), true).status == 201);

    const auto moved = p.put("/api/resources/a", {{"name", "Renamed"}, {"position", {{"x", 0.9}, {"y", 0.1}}},
                                                  {"country", "Japan"}});
    REQUIRE(moved.status == 200);
    CHECK(moved.body.at("name") == "Renamed");
    CHECK(moved.body.at("country") == "Japan");
    auto disk = config::load_config(p.service().config_path());
    CHECK(disk.resources == api_pins(p));
    CHECK(disk.find("a")->x == 0.9);

    CHECK(p.del("/api/resources/b").status == 200);
    CHECK(p.del("/api/resources/b").status == 404);
    disk = config::load_config(p.service().config_path());
    CHECK(disk.resources == api_pins(p));
    CHECK(disk.resources.size() == 1);

    const auto renamed = p.put("/api/testbed", {{"name", "Renamed Grid"}});
    CHECK(renamed.status == 200);
    CHECK(renamed.body.at("name") == "Renamed Grid");
    CHECK(config::load_config(p.service().config_path()).name == "Renamed Grid");
}

TEST_CASE("bad admin requests change nothing") {
    mt::LivePortal p;
    REQUIRE(p.post("/api/resources", pin_body("a", 2301), true).status == 201);
    const std::string before = slurp(p.service().config_path());
    const auto version = p.get("/api/resources").body.at("version");

    auto expect = [&](const mt::Reply& r, int status, const std::string& code) {
        CHECK(r.status == status);
        CHECK(r.body.at("code") == code);
    };
    expect(p.post("/api/resources", pin_body("a", 2301), true), 409, "duplicate_resource");
    expect(p.post("/api/resources", pin_body("c", 99999), true), 400, "validation");
    expect(p.post("/api/resources", pin_body("c", 2000, 1.5), true), 400, "validation");
    expect(p.post("/api/resources", pin_body("bad id", 2000), true), 400, "validation");
    expect(p.post("/api/resources", {{"id", "c"}, {"colour", "red"}}, true), 400, "validation");
    expect(p.post("/api/resources", {{"id", "c"}, {"port", "80"}}, true), 400, "validation");
    expect(p.put("/api/resources/a", {{"id", "b"}}), 400, "validation");
    expect(p.put("/api/resources/a", {{"address", ""}}), 400, "validation");
    expect(p.put("/api/resources/a", {{"position", {{"x", 0.1}}}}), 400, "validation");
    expect(p.put("/api/resources/nope", {{"name", "x"}}), 404, "unknown_resource");
    expect(p.put("/api/testbed", {{"logo_path", "/etc/passwd"}}), 400, "validation");
    expect(mt::to_reply(p.client().Post("/api/resources", p.admin(), "{not json", "application/json")), 400,
           "bad_request");
    expect(mt::to_reply(p.client().Put("/api/resources/a", p.admin(), "[1]", "application/json")), 400, "bad_request");

    const auto problems = p.post("/api/resources", pin_body("c", 2000, 0.5, 7.0), true);
    REQUIRE(problems.body.contains("problems"));
    CHECK(problems.body.at("problems").at(0).get<std::string>().find("y") != std::string::npos);

    CHECK(slurp(p.service().config_path()) == before);
    CHECK(p.get("/api/resources").body.at("version") == version);
}

TEST_CASE("queries run over the cache") {
    auto up = mt::start_agent("up.example.org", 7);
    mt::LivePortal p;
    REQUIRE(p.post("/api/resources", pin_body("up", up->port()), true).status == 201);
    REQUIRE(p.post("/api/resources", pin_body("down", mt::start_agent("gone", 1)->port()), true).status == 201);
    CHECK(mt::eventually([&] { return status_of(p, "up") == "UP" && status_of(p, "down") == "DOWN"; }, 3s));

    const auto r = p.post("/api/query", {{"filter", "(load-one>=0)"}, {"projection", {"cpu-count", "os-name"}}});
    REQUIRE(r.status == 200);
    const auto snap = p.service().manager().snapshot();
    const auto direct = query::query(*snap, protocol::parse_filter("(load-one>=0)"));
    std::set<std::string> api_matched, direct_matched, up_ids;
    for (const auto& row : r.body.at("rows")) {
        if (row.at("matched")) api_matched.insert(row.at("id"));
    }
    for (const auto& row : direct) {
        if (row.matched) direct_matched.insert(row.id);
    }
    for (const auto& loc : snap->locations) {
        if (loc.status == core::Status::Up) up_ids.insert(loc.id);
    }
    CHECK(r.body.at("rows").size() == 2);
    CHECK(api_matched == direct_matched);
    CHECK(api_matched == up_ids);
    CHECK(r.body.at("rows").at(0).at("projected").at("cpu-count") == json{"4"});
    CHECK(r.body.at("rows").at(1).at("projected").empty());
    CHECK(r.body.at("filter") == "(load-one>=0)");

    const auto status = p.post("/api/query", {{"filter", "(status=down)"}});
    CHECK(status.body.at("rows").at(1).at("matched") == true);
    CHECK(status.body.at("rows").at(0).at("matched") == false);

    const auto bad = p.post("/api/query", {{"filter", "(a="}});
    CHECK(bad.status == 400);
    CHECK(bad.body.at("code") == "bad_filter");
    CHECK(bad.body.at("offset") == 3);
    CHECK(bad.body.contains("expected"));
    CHECK(p.post("/api/query", {{"filter", 3}}).status == 400);
    CHECK(p.post("/api/query", {{"filter", "(a=*)"}, {"projection", "a"}}).status == 400);
}

TEST_CASE("refresh polls on demand") {
    auto agent = mt::start_agent("alpha", 1);
    mt::LivePortal p(std::string("secret"), [](portal::ServiceConfig& c) {
        c.base_policy.period = 60s;
        c.base_policy.per_resource_timeout = 1s;
    });
    REQUIRE(p.post("/api/resources", pin_body("a", agent->port()), true).status == 201);
    REQUIRE(p.post("/api/resources", pin_body("b", agent->port()), true).status == 201);
    // the scheduler's next round is a minute away
    CHECK(status_of(p, "a") == "UNKNOWN");
    REQUIRE(mt::to_reply(p.client().Post("/api/refresh", "", "application/json")).status == 200);
    CHECK(status_of(p, "a") == "UP");
    CHECK(status_of(p, "b") == "UP");
    const auto before_b = p.get("/api/resources/b").body.at("last_attempt");
    std::this_thread::sleep_for(5ms);
    const auto r = p.post("/api/refresh", {{"id", "a"}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("version") == p.get("/api/resources").body.at("version"));
    CHECK(p.get("/api/resources/b").body.at("last_attempt") == before_b);
    CHECK(p.post("/api/refresh", {{"id", "zz"}}).status == 404);
}

TEST_CASE("long-poll returns when the version moves") {
    mt::LivePortal p;
    const std::uint64_t v = p.get("/api/resources").body.at("version");
    const auto idle_start = std::chrono::steady_clock::now();
    const auto idle = p.get("/api/snapshot-version?after=" + std::to_string(v) + "&timeout_ms=200");
    CHECK(idle.body.at("changed") == false);
    CHECK(idle.body.at("version") == v);
    CHECK(std::chrono::steady_clock::now() - idle_start >= 200ms);

    std::thread writer([&] {
        std::this_thread::sleep_for(100ms);
        p.post("/api/resources", pin_body("a", 2301), true);
    });
    const auto moved = p.get("/api/snapshot-version?after=" + std::to_string(v) + "&timeout_ms=5000");
    writer.join();
    CHECK(moved.body.at("changed") == true);
    CHECK(moved.body.at("version").get<std::uint64_t>() > v);
    CHECK(p.get("/api/snapshot-version?after=0").body.at("changed") == true);
    CHECK(p.get("/api/snapshot-version?after=x").status == 400);
}

TEST_CASE("event stream announces versions in order") {
    auto agent = mt::start_agent("alpha", 1);
    mt::LivePortal p;
    std::vector<std::pair<std::string, json>> events;
    std::thread writer([&] {
        std::this_thread::sleep_for(100ms);
        p.post("/api/resources", pin_body("a", agent->port()), true);
        p.put("/api/resources/a", {{"name", "again"}});
    });
    std::string buffer;
    auto cli = p.client();
    cli.Get("/api/events", [&](const char* data, size_t n) {
        buffer.append(data, n);
        std::size_t end;
        while ((end = buffer.find("\n\n")) != std::string::npos) {
            const std::string block = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            std::string event, payload;
            std::istringstream lines(block);
            for (std::string line; std::getline(lines, line);) {
                if (line.rfind("event: ", 0) == 0) event = line.substr(7);
                if (line.rfind("data: ", 0) == 0) payload = line.substr(6);
            }
            if (!event.empty()) events.emplace_back(event, json::parse(payload));
        }
        return events.size() < 5;
    });
    writer.join();
    REQUIRE(events.size() >= 5);
    CHECK(events[0].first == "hello");
    std::uint64_t last = events[0].second.at("version");
    bool saw_add = false;
    for (std::size_t i = 1; i < events.size(); ++i) {
        CHECK(events[i].first == "change");
        const std::uint64_t v = events[i].second.at("version");
        CHECK(v > last);
        last = v;
        if (events[i].second.at("changed_ids") == json{"a"}) saw_add = true;
    }
    CHECK(saw_add);
}

TEST_CASE("logo and map uploads") {
    mt::LivePortal p;
    auto cli = p.client();
    const std::string old_logo = p.get("/api/testbed").body.at("logo_url");

    auto up = cli.Put("/api/testbed/logo", p.admin(), httplib::MultipartFormDataItems{{"file", kPng, "logo.png", "image/png"}});
    REQUIRE(up);
    REQUIRE(up->status == 200);
    const std::string logo_url = json::parse(up->body).at("logo_url");
    CHECK(logo_url.rfind("/assets/logo-", 0) == 0);
    CHECK(logo_url.substr(logo_url.size() - 4) == ".png");
    CHECK(cli.Get(logo_url)->body == kPng);
    CHECK(cli.Get(old_logo)->status == 404);
    CHECK("/" + config::load_config(p.service().config_path()).logo_path == logo_url);

    auto map = cli.Put("/api/testbed/map", p.admin(), httplib::MultipartFormDataItems{{"file", "GIF89a....", "m.gif", ""}});
    REQUIRE(map);
    CHECK(map->status == 200);
    CHECK(json::parse(map->body).at("map_url").get<std::string>().find(".gif") != std::string::npos);

    auto text = cli.Put("/api/testbed/logo", p.admin(), httplib::MultipartFormDataItems{{"file", "hello", "x.txt", ""}});
    CHECK(text->status == 415);
    CHECK(json::parse(text->body).at("code") == "unsupported_media_type");
    auto raw = cli.Put("/api/testbed/logo", p.admin(), kPng, "image/png");
    CHECK(raw->status == 415);
    auto big = cli.Put("/api/testbed/logo", p.admin(),
                       httplib::MultipartFormDataItems{{"file", kPng + std::string(portal::kMaxUploadBytes, 'x'), "big.png", ""}});
    REQUIRE(big);
    CHECK(big->status == 413);
    auto anonymous = cli.Put("/api/testbed/logo", httplib::MultipartFormDataItems{{"file", kPng, "logo.png", ""}});
    CHECK(anonymous->status == 401);
    CHECK("/" + config::load_config(p.service().config_path()).logo_path == logo_url);
}

TEST_CASE("hand edits to the config file are picked up") {
    mt::LivePortal p;
    REQUIRE(p.post("/api/resources", pin_body("a", 2301), true).status == 201);
    auto cfg = config::load_config(p.service().config_path());
    cfg.resources.push_back({"b", "Hand Added", "127.0.0.1", 2302, 0.2, 0.2, ""});
    cfg.find("a")->name = "Hand Renamed";
    config::save_config(p.service().config_path(), cfg);
    CHECK(mt::eventually([&] { return api_pins(p) == cfg.resources; }, 3s));

    // an invalid edit is ignored and the portal keeps serving
    {
        std::ofstream out(p.service().config_path(), std::ios::trunc);
        out << "{\"format_version\": 1, \"name\": ";
    }
    std::this_thread::sleep_for(300ms);
    CHECK(api_pins(p) == cfg.resources);
    CHECK(p.get("/api/testbed").status == 200);

    cfg.resources.erase(cfg.resources.begin());
    config::save_config(p.service().config_path(), cfg);
    CHECK(mt::eventually([&] { return api_pins(p) == cfg.resources; }, 3s));
}

TEST_CASE("random admin requests without a token change nothing") {
    mt::LivePortal p;
    REQUIRE(p.post("/api/resources", pin_body("a", 2301), true).status == 201);
    const std::string before = slurp(p.service().config_path());
    const auto version = p.get("/api/resources").body.at("version");
    mt::Rng rng(11);
    const std::vector<std::string> paths = {"/api/resources", "/api/resources/a", "/api/resources/zz",
                                            "/api/testbed", "/api/testbed/logo", "/api/testbed/map"};
    const std::vector<std::string> headers = {"", "Bearer", "Bearer ", "Bearer secre", "Bearer secret2",
                                              "bearer secret", "Basic c2VjcmV0", "secret", "Bearer  secret"};
    auto cli = p.client();
    int successes = 0;
    for (int i = 0; i < 200; ++i) {
        httplib::Headers h;
        const auto& auth = mt::pick_from(rng, headers);
        if (!auth.empty()) h.emplace("Authorization", auth);
        json body = pin_body("x" + std::to_string(i), 1 + static_cast<int>(mt::pick(rng, 65535)));
        if (mt::pick(rng, 3) == 0) body = json{{"name", mt::random_value(rng, true)}};
        const std::string& path = mt::pick_from(rng, paths);
        httplib::Result r;
        switch (mt::pick(rng, 3)) {
            case 0: r = cli.Post(path, h, body.dump(), "application/json"); break;
            case 1: r = cli.Put(path, h, body.dump(), "application/json"); break;
            default: r = cli.Delete(path, h); break;
        }
        REQUIRE(r);
        if (r->status < 400) ++successes;
    }
    CHECK(successes == 0);
    CHECK(slurp(p.service().config_path()) == before);
    CHECK(p.get("/api/resources").body.at("version") == version);
}

TEST_CASE("cors and preflight") {
    mt::LivePortal p(std::string("secret"), [](portal::ServiceConfig& c) { c.cors_origins = {"http://ui.example"}; });
    auto cli = p.client();
    auto allowed = cli.Get("/api/testbed", {{"Origin", "http://ui.example"}});
    CHECK(allowed->get_header_value("Access-Control-Allow-Origin") == "http://ui.example");
    auto other = cli.Get("/api/testbed", {{"Origin", "http://evil.example"}});
    CHECK_FALSE(other->has_header("Access-Control-Allow-Origin"));
    auto pre = cli.Options("/api/resources", {{"Origin", "http://ui.example"}});
    CHECK(pre->status == 204);
    CHECK(pre->get_header_value("Access-Control-Allow-Headers").find("Authorization") != std::string::npos);
}

TEST_CASE("startup failures") {
    mt::LivePortal first;
    portal::ServiceConfig clash;
    clash.portal_dir = first.dir();
    clash.port = first.service().port();
    portal::PortalService second(clash);
    CHECK_THROWS_AS(second.start(), portal::StartupError);

    mt::TempDir empty;
    portal::ServiceConfig missing;
    missing.portal_dir = empty.path();
    CHECK_THROWS_AS(portal::PortalService{missing}, config::IoError);
}

TEST_CASE("stop wakes waiters and is idempotent") {
    mt::LivePortal p;
    std::thread waiter([&] { p.service().wait(); });
    std::this_thread::sleep_for(20ms);
    p.service().stop();
    waiter.join();
    p.service().stop();
    CHECK(p.get("/api/testbed").status == 0);
}
