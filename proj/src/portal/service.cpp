#include "meshscape/portal/service.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <httplib.h>

#include "meshscape/config/scaffold.hpp"
#include "meshscape/portal/json.hpp"
#include "meshscape/protocol/filter.hpp"
#include "meshscape/query/query.hpp"

namespace meshscape::portal {

namespace fs = std::filesystem;

namespace {

constexpr int kHttpThreads = 32;
constexpr std::size_t kMultipartOverhead = 256 * 1024;
constexpr auto kMaxLongPoll = std::chrono::milliseconds(60'000);

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json extra = json::object()) {
    extra["code"] = code;
    extra["message"] = message;
    send_json(res, status, extra);
}

std::string code_for_status(int status) {
    switch (status) {
        case 400: return "bad_request";
        case 401: return "unauthorized";
        case 403: return "forbidden";
        case 404: return "not_found";
        case 405: return "method_not_allowed";
        case 413: return "too_large";
        case 415: return "unsupported_media_type";
        default: return status >= 500 ? "internal" : "error";
    }
}

json body_object(const httplib::Request& req, bool allow_empty) {
    if (req.body.empty()) {
        if (allow_empty) return json::object();
        throw ApiError(400, "bad_request", "request body required");
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw ApiError(400, "bad_request", "body must be a JSON object");
    return body;
}

std::string string_field(const json& body, const char* key) {
    const auto& v = body.at(key);
    if (!v.is_string()) throw ApiError(400, "validation", std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

double number_field(const json& v, const char* key) {
    if (!v.is_number()) throw ApiError(400, "validation", std::string("'") + key + "' must be a number");
    return v.get<double>();
}

int port_field(const json& body) {
    const auto& v = body.at("port");
    if (!v.is_number_integer()) throw ApiError(400, "validation", "'port' must be an integer");
    const auto p = v.get<std::int64_t>();
    if (p < 1 || p > 65535) throw ApiError(400, "validation", "port " + std::to_string(p) + " out of range [1, 65535]");
    return static_cast<int>(p);
}

struct PinEdit {
    std::optional<std::string> name, address, country;
    std::optional<int> port;
    std::optional<double> x, y;
};

// Fields a client may set on a pin. `position` may be nested or flat x/y.
PinEdit pin_fields(const json& body, bool allow_id) {
    static const std::vector<std::string> known = {"id", "name", "address", "port", "x", "y", "position", "country"};
    for (const auto& [key, _] : body.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end() || (key == "id" && !allow_id)) {
            throw ApiError(400, "validation", "unknown field '" + key + "'");
        }
    }
    PinEdit u;
    if (body.contains("name")) u.name = string_field(body, "name");
    if (body.contains("address")) u.address = string_field(body, "address");
    if (body.contains("country")) u.country = string_field(body, "country");
    if (body.contains("port")) u.port = port_field(body);
    if (body.contains("position")) {
        const auto& p = body.at("position");
        if (!p.is_object() || !p.contains("x") || !p.contains("y")) {
            throw ApiError(400, "validation", "'position' must be an object with x and y");
        }
        u.x = number_field(p.at("x"), "x");
        u.y = number_field(p.at("y"), "y");
    }
    if (body.contains("x")) u.x = number_field(body.at("x"), "x");
    if (body.contains("y")) u.y = number_field(body.at("y"), "y");
    return u;
}

// Applies the edit to `pin` and returns the matching manager update.
core::ResourceUpdate apply_fields(config::ResourcePin& pin, const PinEdit& e) {
    core::ResourceUpdate u;
    if (e.name) pin.name = *(u.name = e.name);
    if (e.address) pin.address = *(u.address = e.address);
    if (e.port) pin.port = *(u.port = e.port);
    if (e.country) pin.country = *(u.country = e.country);
    if (e.x) pin.x = *e.x;
    if (e.y) pin.y = *e.y;
    if (e.x || e.y) u.position = core::Position{pin.x, pin.y};
    return u;
}

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string asset_url(const std::string& path) { return path.empty() ? std::string() : "/" + path; }

bool same_secret(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
    return diff == 0;
}

void log_line(const std::string& msg) { std::cerr << "meshscape: " << msg << std::endl; }

const char* kFallbackIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>meshscape</title></head>
<body><h1 id="name">meshscape</h1><p>No UI bundle is installed. The portal API is under <code>/api/</code>.</p>
<script>fetch('/api/testbed').then(r => r.json()).then(t => { document.getElementById('name').textContent = t.name; });</script>
</body></html>
)";

}  // namespace

PortalService::PortalService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    testbed_ = config::load_config(config_path());
    core::RefreshPolicy policy = core::RefreshPolicy::with_overrides(cfg_.base_policy, testbed_.refresh);
    manager_ = std::make_unique<core::TestbedManager>(testbed_, policy, cfg_.poller);
    remember_disk_state();
    http_ = std::make_unique<httplib::Server>();
    http_->new_task_queue = [] { return new httplib::ThreadPool(kHttpThreads); };
    http_->set_payload_max_length(kMaxUploadBytes + kMultipartOverhead);
    // SO_REUSEPORT (the library default) would let a second portal share the port.
    http_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    install_routes();
}

PortalService::~PortalService() { stop(); }

fs::path PortalService::config_path() const { return cfg_.portal_dir / config::kConfigFileName; }

config::TestbedConfig PortalService::testbed() const {
    std::lock_guard lock(admin_mu_);
    return testbed_;
}

void PortalService::start() {
    {
        std::lock_guard lock(run_mu_);
        if (running_) return;
    }
    if (cfg_.port == 0) {
        bound_port_ = http_->bind_to_any_port(cfg_.host);
    } else if (http_->bind_to_port(cfg_.host, cfg_.port)) {
        bound_port_ = cfg_.port;
    } else {
        bound_port_ = -1;
    }
    if (bound_port_ <= 0) throw StartupError("cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));

    stopping_ = false;
    manager_->start();
    watcher_ = std::jthread([this](std::stop_token st) { watch_loop(st); });
    listener_ = std::thread([this] { http_->listen_after_bind(); });
    std::lock_guard lock(run_mu_);
    running_ = true;
}

void PortalService::stop() {
    {
        std::lock_guard lock(run_mu_);
        if (!running_) return;
        running_ = false;
    }
    stopping_ = true;
    if (watcher_.joinable()) {
        watcher_.request_stop();
        watcher_.join();
    }
    http_->stop();
    if (listener_.joinable()) listener_.join();
    manager_->stop();
    run_cv_.notify_all();
}

void PortalService::wait() {
    std::unique_lock lock(run_mu_);
    run_cv_.wait(lock, [&] { return !running_; });
}

void PortalService::check_admin(const std::string& authorization) const {
    if (!cfg_.admin_token) throw ApiError(403, "admin_disabled", "admin endpoints are disabled on this portal");
    const std::string prefix = "Bearer ";
    if (authorization.rfind(prefix, 0) != 0 || !same_secret(authorization.substr(prefix.size()), *cfg_.admin_token)) {
        throw ApiError(401, "unauthorized", "missing or invalid admin token");
    }
}

void PortalService::remember_disk_state() {
    std::error_code ec;
    const auto mtime = fs::last_write_time(config_path(), ec);
    disk_mtime_ = ec ? std::nullopt : std::optional(mtime);
    disk_text_ = read_file(config_path()).value_or("");
}

std::uint64_t PortalService::commit(const config::TestbedConfig& next,
                                    const std::optional<core::TestbedChange>& change) {
    const fs::path path = config_path();
    config::save_config(path, next);
    std::uint64_t version = 0;
    try {
        version = change ? manager_->mutate(*change) : manager_->snapshot()->version;
    } catch (...) {
        try {
            config::save_config(path, testbed_);
        } catch (const std::exception& e) {
            log_line(std::string("failed to restore ") + path.string() + ": " + e.what());
        }
        remember_disk_state();
        throw;
    }
    testbed_ = next;
    remember_disk_state();
    return version;
}

bool PortalService::reload_if_changed() {
    std::lock_guard lock(admin_mu_);
    std::error_code ec;
    const auto mtime = fs::last_write_time(config_path(), ec);
    if (ec) return false;
    const auto text = read_file(config_path());
    if (!text) return false;
    if (disk_mtime_ && *disk_mtime_ == mtime && *text == disk_text_) return false;
    disk_mtime_ = mtime;
    if (*text == disk_text_) return false;
    disk_text_ = *text;
    config::TestbedConfig next;
    try {
        next = config::parse_config(*text);
    } catch (const std::exception& e) {
        log_line("ignoring edit to " + config_path().string() + ": " + e.what());
        return false;
    }
    apply_reloaded(next);
    return true;
}

void PortalService::apply_reloaded(const config::TestbedConfig& next) {
    if (next.refresh != testbed_.refresh) log_line("refresh settings changed on disk; they apply after a restart");
    for (const auto& pin : testbed_.resources) {
        if (!next.find(pin.id)) manager_->mutate(core::RemoveResource{pin.id});
    }
    for (const auto& pin : next.resources) {
        const config::ResourcePin* old = testbed_.find(pin.id);
        if (!old) {
            manager_->mutate(core::AddResource{pin});
        } else if (!(*old == pin)) {
            core::ResourceUpdate u;
            u.name = pin.name;
            u.address = pin.address;
            u.port = pin.port;
            u.position = core::Position{pin.x, pin.y};
            u.country = pin.country;
            manager_->mutate(core::UpdateResource{pin.id, u});
        }
    }
    testbed_ = next;
    log_line("reloaded " + config_path().string());
}

void PortalService::watch_loop(std::stop_token stop) {
    std::mutex mu;
    std::condition_variable_any cv;
    while (!stop.stop_requested()) {
        {
            std::unique_lock lock(mu);
            cv.wait_for(lock, stop, cfg_.reload_interval, [] { return false; });
        }
        if (stop.stop_requested()) break;
        try {
            reload_if_changed();
        } catch (const std::exception& e) {
            log_line(std::string("config reload failed: ") + e.what());
        }
    }
}

void PortalService::install_routes() {
    auto& s = *http_;
    using httplib::Request;
    using httplib::Response;

    s.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const ApiError& e) {
            send_error(res, e.status(), e.code(), e.what());
        } catch (const core::UnknownResource& e) {
            send_error(res, 404, "unknown_resource", e.what());
        } catch (const core::DuplicateResource& e) {
            send_error(res, 409, "duplicate_resource", e.what());
        } catch (const config::ValidationError& e) {
            send_error(res, 400, "validation", e.what(), {{"problems", e.problems()}});
        } catch (const json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        } catch (...) {
            send_error(res, 500, "internal", "unexpected failure");
        }
    });
    s.set_error_handler([](const Request&, Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, res.status, code_for_status(res.status), httplib::status_message(res.status));
        return httplib::Server::HandlerResponse::Handled;
    });
    s.set_post_routing_handler([this](const Request& req, Response& res) {
        const std::string origin = req.get_header_value("Origin");
        if (origin.empty()) return;
        const auto& allowed = cfg_.cors_origins;
        const bool any = std::find(allowed.begin(), allowed.end(), "*") != allowed.end();
        if (any || std::find(allowed.begin(), allowed.end(), origin) != allowed.end()) {
            res.set_header("Access-Control-Allow-Origin", any ? "*" : origin);
            res.set_header("Vary", "Origin");
        }
    });
    s.Options(R"(/api/.*)", [](const Request&, Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
    });

    const fs::path assets = cfg_.portal_dir / config::kAssetsDir;
    s.set_mount_point("/" + std::string(config::kAssetsDir), assets.string());
    if (cfg_.ui_dir) {
        s.set_mount_point("/", cfg_.ui_dir->string());
    } else {
        s.Get("/", [](const Request&, Response& res) { res.set_content(kFallbackIndex, "text/html; charset=utf-8"); });
    }

    auto testbed_json = [this] {
        const config::TestbedConfig t = testbed();
        const auto& logo = t.logo_path;
        const auto& map = t.map_path;
        return json{{"name", t.name},
                    {"logo_url", logo.empty() ? json(nullptr) : json(asset_url(logo))},
                    {"map_url", map.empty() ? json(nullptr) : json(asset_url(map))},
                    {"refresh", policy_json(manager_->policy())},
                    {"version", manager_->snapshot()->version},
                    {"admin_enabled", cfg_.admin_token.has_value()}};
    };

    // read side

    s.Get("/api/testbed", [testbed_json](const Request&, Response& res) { send_json(res, 200, testbed_json()); });

    s.Get("/api/resources", [this](const Request&, Response& res) {
        send_json(res, 200, snapshot_json(*manager_->snapshot()));
    });

    s.Get(R"(/api/resources/([^/]+))", [this](const Request& req, Response& res) {
        const std::string id = req.matches[1];
        const core::SnapshotPtr snap = manager_->snapshot();
        const core::Location* loc = snap->find(id);
        if (!loc) throw core::UnknownResource(id);
        json body = location_detail(*loc);
        body["version"] = snap->version;
        send_json(res, 200, body);
    });

    s.Post("/api/query", [this](const Request& req, Response& res) {
        const json body = body_object(req, false);
        if (!body.contains("filter") || !body.at("filter").is_string()) {
            throw ApiError(400, "bad_request", "'filter' must be a string");
        }
        const std::string text = body.at("filter").get<std::string>();
        std::optional<std::vector<std::string>> projection;
        if (body.contains("projection") && !body.at("projection").is_null()) {
            const auto& p = body.at("projection");
            if (!p.is_array() || !std::all_of(p.begin(), p.end(), [](const json& v) { return v.is_string(); })) {
                throw ApiError(400, "bad_request", "'projection' must be a list of attribute names");
            }
            projection = p.get<std::vector<std::string>>();
        }
        protocol::Filter filter;
        try {
            filter = protocol::parse_filter(text);
        } catch (const protocol::SyntaxError& e) {
            send_error(res, 400, "bad_filter", e.what(), {{"offset", e.offset()}, {"expected", e.expected()}});
            return;
        }
        const core::SnapshotPtr snap = manager_->snapshot();
        json rows = json::array();
        for (const auto& m : query::query(*snap, filter, projection)) rows.push_back(match_json(m));
        send_json(res, 200, {{"version", snap->version}, {"filter", protocol::render_filter(filter)}, {"rows", rows}});
    });

    s.Post("/api/refresh", [this](const Request& req, Response& res) {
        const json body = body_object(req, true);
        std::optional<std::string> id;
        if (body.contains("id") && !body.at("id").is_null()) id = string_field(body, "id");
        send_json(res, 200, {{"version", manager_->refresh_now(id)}});
    });

    s.Get("/api/snapshot-version", [this](const Request& req, Response& res) {
        std::uint64_t after = 0;
        std::chrono::milliseconds timeout{25'000};
        try {
            if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
            if (req.has_param("timeout_ms")) timeout = std::chrono::milliseconds(std::stoll(req.get_param_value("timeout_ms")));
        } catch (const std::exception&) {
            throw ApiError(400, "bad_request", "'after' and 'timeout_ms' must be integers");
        }
        timeout = std::clamp(timeout, std::chrono::milliseconds(0), kMaxLongPoll);
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        std::uint64_t version = manager_->snapshot()->version;
        while (version <= after && !stopping_) {
            const auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) break;
            version = manager_->await_version(after, std::min(left, std::chrono::milliseconds(250)));
        }
        send_json(res, 200, {{"version", version}, {"changed", version > after}});
    });

    s.Get("/api/events", [this](const Request&, Response& res) {
        auto sub = std::make_shared<core::Subscription>(manager_->subscribe());
        const std::uint64_t current = manager_->snapshot()->version;
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        auto hello_sent = std::make_shared<bool>(false);
        auto idle = std::make_shared<int>(0);
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, sub, current, hello_sent, idle](std::size_t, httplib::DataSink& sink) {
                auto write = [&](const std::string& chunk) { return sink.write(chunk.data(), chunk.size()); };
                if (!*hello_sent) {
                    *hello_sent = true;
                    return write("event: hello\ndata: " + json{{"version", current}}.dump() + "\n\n");
                }
                if (stopping_) {
                    sink.done();
                    return true;
                }
                if (auto ev = sub->next(std::chrono::milliseconds(500))) {
                    *idle = 0;
                    const json data{{"version", ev->version}, {"changed_ids", ev->changed_ids}};
                    return write("id: " + std::to_string(ev->version) + "\nevent: change\ndata: " + data.dump() + "\n\n");
                }
                if (++*idle >= 20) {
                    *idle = 0;
                    return write(": keepalive\n\n");
                }
                return sink.is_writable();
            },
            [sub](bool) { sub->cancel(); });
    });

    // admin side

    s.Post("/api/resources", [this](const Request& req, Response& res) {
        check_admin(req.get_header_value("Authorization"));
        const json body = body_object(req, true);
        const PinEdit fields = pin_fields(body, true);
        config::ResourcePin pin = config::default_pin(0.5, 0.5);
        if (body.contains("id")) pin.id = string_field(body, "id");
        apply_fields(pin, fields);

        std::lock_guard lock(admin_mu_);
        if (testbed_.find(pin.id)) throw core::DuplicateResource(pin.id);
        config::TestbedConfig next = testbed_;
        next.resources.push_back(pin);
        const std::uint64_t version = commit(next, core::AddResource{pin});
        const core::SnapshotPtr snap = manager_->snapshot();
        json out = location_summary(*snap->find(pin.id));
        out["version"] = version;
        send_json(res, 201, out);
    });

    s.Put(R"(/api/resources/([^/]+))", [this](const Request& req, Response& res) {
        check_admin(req.get_header_value("Authorization"));
        const std::string id = req.matches[1];
        const json body = body_object(req, false);
        const PinEdit fields = pin_fields(body, false);

        std::lock_guard lock(admin_mu_);
        config::TestbedConfig next = testbed_;
        config::ResourcePin* pin = next.find(id);
        if (!pin) throw core::UnknownResource(id);
        const core::ResourceUpdate update = apply_fields(*pin, fields);
        const std::uint64_t version = commit(next, core::UpdateResource{id, update});
        json out = location_summary(*manager_->snapshot()->find(id));
        out["version"] = version;
        send_json(res, 200, out);
    });

    s.Delete(R"(/api/resources/([^/]+))", [this](const Request& req, Response& res) {
        check_admin(req.get_header_value("Authorization"));
        const std::string id = req.matches[1];
        std::lock_guard lock(admin_mu_);
        config::TestbedConfig next = testbed_;
        auto it = std::find_if(next.resources.begin(), next.resources.end(),
                               [&](const config::ResourcePin& p) { return p.id == id; });
        if (it == next.resources.end()) throw core::UnknownResource(id);
        next.resources.erase(it);
        send_json(res, 200, {{"version", commit(next, core::RemoveResource{id})}});
    });

    s.Put("/api/testbed", [this, testbed_json](const Request& req, Response& res) {
        check_admin(req.get_header_value("Authorization"));
        const json body = body_object(req, false);
        for (const auto& [key, _] : body.items()) {
            if (key != "name") throw ApiError(400, "validation", "unknown field '" + key + "'");
        }
        {
            std::lock_guard lock(admin_mu_);
            config::TestbedConfig next = testbed_;
            if (body.contains("name")) next.name = string_field(body, "name");
            commit(next, std::nullopt);
        }
        send_json(res, 200, testbed_json());
    });

    auto upload = [this, testbed_json](const Request& req, Response& res, bool logo) {
        check_admin(req.get_header_value("Authorization"));
        if (!req.is_multipart_form_data()) {
            throw ApiError(415, "unsupported_media_type", "expected multipart/form-data with a 'file' part");
        }
        if (req.files.empty()) throw ApiError(400, "bad_request", "no file part in upload");
        const httplib::MultipartFormData file = req.has_file("file") ? req.get_file_value("file") : req.files.begin()->second;
        if (file.content.size() > kMaxUploadBytes) {
            throw ApiError(413, "too_large", "images are limited to " + std::to_string(kMaxUploadBytes) + " bytes");
        }
        const std::string type = config::sniff_image_type(file.content);
        if (type.empty()) throw ApiError(415, "unsupported_media_type", "upload is not a png, jpg, gif or svg image");

        {
            std::lock_guard lock(admin_mu_);
            const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count();
            const std::string rel = std::string(config::kAssetsDir) + "/" + (logo ? "logo-" : "map-") +
                                    std::to_string(stamp) + "." + type;
            const fs::path target = cfg_.portal_dir / rel;
            fs::create_directories(target.parent_path());
            config::write_file_atomically(target, file.content);

            config::TestbedConfig next = testbed_;
            std::string& slot = logo ? next.logo_path : next.map_path;
            const std::string previous = slot;
            slot = rel;
            try {
                commit(next, std::nullopt);
            } catch (...) {
                std::error_code ec;
                fs::remove(target, ec);
                throw;
            }
            if (!previous.empty() && previous != rel) {
                std::error_code ec;
                fs::remove(cfg_.portal_dir / previous, ec);
            }
        }
        send_json(res, 200, testbed_json());
    };
    s.Put("/api/testbed/logo", [upload](const Request& req, Response& res) { upload(req, res, true); });
    s.Put("/api/testbed/map", [upload](const Request& req, Response& res) { upload(req, res, false); });
}

}  // namespace meshscape::portal
