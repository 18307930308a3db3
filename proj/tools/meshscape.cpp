#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "meshscape/config/scaffold.hpp"
#include "meshscape/portal/cli.hpp"
#include "meshscape/portal/service.hpp"
#include "meshscape/provider/profile.hpp"
#include "meshscape/provider/servers.hpp"

namespace {

using namespace meshscape;

// Blocks SIGINT/SIGTERM in every thread; main waits for them explicitly.
sigset_t block_termination() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_termination(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

std::uint16_t checked_port(int port) {
    if (port < 0 || port > 65535) throw CLI::ValidationError("--port", "must be in [0, 65535]");
    return static_cast<std::uint16_t>(port);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meshscape: testbed monitoring portals over a simulated directory service"};
    app.require_subcommand(1);

    // init
    auto* init = app.add_subcommand("init", "create a blank portal directory");
    std::string init_dir;
    config::ScaffoldOptions scaffold_opts;
    std::string map_image, logo_image;
    init->add_option("dir", init_dir, "portal directory (absent or empty)")->required();
    init->add_option("--name", scaffold_opts.name, "testbed name");
    init->add_option("--map", map_image, "map image to copy into assets/");
    init->add_option("--logo", logo_image, "logo image to copy into assets/");

    // serve
    auto* serve = app.add_subcommand("serve", "serve a portal directory over HTTP");
    portal::ServiceConfig service;
    std::string portal_dir, admin_token, ui_dir;
    int reload_ms = 500;
    serve->add_option("dir", portal_dir, "portal directory")->required();
    serve->add_option("--host", service.host, "listen address");
    serve->add_option("--port", service.port, "listen port, 0 for any")->check(CLI::Range(0, 65535));
    serve->add_option("--admin-token", admin_token, "enables admin endpoints (MESHSCAPE_ADMIN_TOKEN overrides)");
    serve->add_option("--ui-dir", ui_dir, "static UI bundle served at /");
    serve->add_option("--cors-origin", service.cors_origins, "allowed CORS origin, repeatable");
    serve->add_option("--reload-ms", reload_ms, "config watch interval")->check(CLI::PositiveNumber);

    // agent
    auto* agent = app.add_subcommand("agent", "run a simulated resource directory server");
    std::string profile_path, hostname = "localhost", register_to, bind_host = "127.0.0.1", advertise;
    int agent_port = config::kDefaultDirectoryPort;
    std::optional<std::uint64_t> seed;
    int tick_ms = 1000, delay_ms = 0;
    std::int64_t ttl = 30;
    agent->add_option("--profile", profile_path, "resource profile file");
    agent->add_option("--hostname", hostname, "hostname of the built-in profile when --profile is absent");
    agent->add_option("--port", agent_port, "listen port, 0 for any");
    agent->add_option("--bind", bind_host, "listen address");
    agent->add_option("--seed", seed, "overrides the profile's seed");
    agent->add_option("--tick-ms", tick_ms, "dynamic state step interval, 0 freezes it")->check(CLI::NonNegativeNumber);
    agent->add_option("--delay-ms", delay_ms, "artificial delay before each search reply")->check(CLI::NonNegativeNumber);
    agent->add_option("--register", register_to, "index server to register with, host:port");
    agent->add_option("--ttl", ttl, "registration ttl in seconds")->check(CLI::PositiveNumber);
    agent->add_option("--advertise", advertise, "address published in registrations (default: bind address)");

    // giis
    auto* giis = app.add_subcommand("giis", "run an index server that aggregates registered agents");
    int giis_port = config::kDefaultDirectoryPort, expire_ms = 1000, search_ms = 5000;
    std::string giis_bind = "127.0.0.1";
    giis->add_option("--port", giis_port, "listen port, 0 for any");
    giis->add_option("--bind", giis_bind, "listen address");
    giis->add_option("--expire-interval-ms", expire_ms, "registration sweep interval")->check(CLI::PositiveNumber);
    giis->add_option("--search-timeout-ms", search_ms, "fan-out budget per search")->check(CLI::PositiveNumber);

    // query
    auto* query = app.add_subcommand("query", "run a filter against a portal's resources or a directory server");
    portal::QueryOptions query_opts;
    std::string query_dir, endpoint, scope = "sub";
    int query_timeout_ms = 5000;
    query->add_option("filter", query_opts.filter, "search filter, e.g. (status=up)")->required();
    query->add_option("dir", query_dir, "portal directory");
    query->add_option("--endpoint", endpoint, "directory server host:port");
    query->add_option("--attr", query_opts.projection, "attribute to show, repeatable")->delimiter(',');
    query->add_option("--base", query_opts.base, "search base dn (endpoint mode)");
    query->add_option("--scope", scope, "base, one or sub (endpoint mode)")->check(CLI::IsMember({"base", "one", "sub"}));
    query->add_option("--timeout-ms", query_timeout_ms, "per-resource timeout")->check(CLI::PositiveNumber);

    // status
    auto* status = app.add_subcommand("status", "show resource status of a portal directory or a running portal");
    portal::StatusOptions status_opts;
    std::string status_dir, status_url;
    int status_timeout_ms = 5000;
    status->add_option("dir", status_dir, "portal directory");
    status->add_option("--url", status_url, "running portal, e.g. http://127.0.0.1:8080");
    status->add_option("--timeout-ms", status_timeout_ms, "per-resource timeout")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (init->parsed()) {
            if (!map_image.empty()) scaffold_opts.map_image = map_image;
            if (!logo_image.empty()) scaffold_opts.logo_image = logo_image;
            for (const auto& f : config::scaffold(init_dir, scaffold_opts)) std::cout << (std::filesystem::path(init_dir) / f).string() << '\n';
            return 0;
        }

        if (serve->parsed()) {
            const sigset_t signals = block_termination();
            service.portal_dir = portal_dir;
            if (const char* env = std::getenv("MESHSCAPE_ADMIN_TOKEN"); env && *env) admin_token = env;
            if (!admin_token.empty()) service.admin_token = admin_token;
            if (!ui_dir.empty()) service.ui_dir = ui_dir;
            service.reload_interval = std::chrono::milliseconds(reload_ms);
            portal::PortalService portal(service);
            portal.start();
            std::cout << "serving " << portal.testbed().name << " on http://" << service.host << ':' << portal.port()
                      << (service.admin_token ? " (admin enabled)" : " (read-only)") << std::endl;
            wait_for_termination(signals);
            portal.stop();
            return 0;
        }

        if (agent->parsed()) {
            const sigset_t signals = block_termination();
            provider::AgentOptions opts;
            if (!profile_path.empty()) {
                opts.profile = provider::load_profile(profile_path);
            } else {
                opts.profile.hostname = hostname;
                opts.profile.validate();
            }
            if (seed) opts.profile.seed = *seed;
            opts.bind_host = bind_host;
            opts.port = checked_port(agent_port);
            opts.tick_interval = std::chrono::milliseconds(tick_ms);
            opts.response_delay = std::chrono::milliseconds(delay_ms);
            opts.ttl_seconds = ttl;
            opts.advertise_host = advertise.empty() ? bind_host : advertise;
            if (!register_to.empty()) opts.giis = protocol::Endpoint::parse(register_to);
            provider::AgentServer server(std::move(opts));
            server.start();
            std::cout << "agent " << server.state()->profile.hostname << " listening on " << server.endpoint().str()
                      << std::endl;
            wait_for_termination(signals);
            server.stop();
            return 0;
        }

        if (giis->parsed()) {
            const sigset_t signals = block_termination();
            provider::GiisOptions opts;
            opts.bind_host = giis_bind;
            opts.port = checked_port(giis_port);
            opts.expire_interval = std::chrono::milliseconds(expire_ms);
            opts.search_timeout = std::chrono::milliseconds(search_ms);
            provider::GiisServer server(opts);
            server.start();
            std::cout << "giis listening on " << server.endpoint().str() << std::endl;
            wait_for_termination(signals);
            server.stop();
            return 0;
        }

        if (query->parsed()) {
            if (!query_dir.empty()) query_opts.portal_dir = query_dir;
            if (!endpoint.empty()) query_opts.endpoint = protocol::Endpoint::parse(endpoint);
            query_opts.scope = protocol::scope_from_string(scope);
            query_opts.timeout = std::chrono::milliseconds(query_timeout_ms);
            return portal::run_query(query_opts, std::cout, std::cerr);
        }

        if (status->parsed()) {
            if (!status_dir.empty()) status_opts.portal_dir = status_dir;
            if (!status_url.empty()) status_opts.url = status_url;
            status_opts.timeout = std::chrono::milliseconds(status_timeout_ms);
            return portal::run_status(status_opts, std::cout, std::cerr);
        }
    } catch (const config::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
        return portal::kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return portal::kExitFailure;
    }
    return 0;
}
