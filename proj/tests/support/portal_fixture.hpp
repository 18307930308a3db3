#pragma once

#include <httplib.h>

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>

#include "meshscape/config/scaffold.hpp"
#include "meshscape/portal/service.hpp"
#include "support/fixtures.hpp"

namespace meshscape::testing {

struct Reply {
    int status = 0;  // 0 when the request never completed
    nlohmann::json body;
    std::string raw;
    httplib::Headers headers;
};

inline Reply to_reply(const httplib::Result& r) {
    Reply out;
    if (!r) return out;
    out.status = r->status;
    out.raw = r->body;
    out.headers = r->headers;
    out.body = nlohmann::json::parse(r->body, nullptr, false);
    return out;
}

// A scaffolded portal directory served on an ephemeral local port.
class LivePortal {
public:
    explicit LivePortal(std::optional<std::string> token = "secret",
                        const std::function<void(portal::ServiceConfig&)>& tweak = {}) {
        config::ScaffoldOptions opts;
        opts.name = "Test Grid";
        config::scaffold(dir_.path() / "portal", opts);
        portal::ServiceConfig cfg;
        cfg.portal_dir = dir_.path() / "portal";
        cfg.port = 0;
        cfg.admin_token = std::move(token);
        cfg.base_policy.period = std::chrono::milliseconds(300);
        cfg.base_policy.per_resource_timeout = std::chrono::milliseconds(200);
        cfg.reload_interval = std::chrono::milliseconds(50);
        if (tweak) tweak(cfg);
        token_ = cfg.admin_token;
        service_ = std::make_unique<portal::PortalService>(std::move(cfg));
        service_->start();
    }

    portal::PortalService& service() { return *service_; }
    std::filesystem::path dir() const { return dir_.path() / "portal"; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(service_->port()); }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", service_->port());
        c.set_read_timeout(10, 0);
        c.set_connection_timeout(2, 0);
        return c;
    }

    httplib::Headers admin() const {
        return token_ ? httplib::Headers{{"Authorization", "Bearer " + *token_}} : httplib::Headers{};
    }

    Reply get(const std::string& path) const { return to_reply(client().Get(path)); }
    Reply post(const std::string& path, const nlohmann::json& body, bool as_admin = false) const {
        return to_reply(client().Post(path, as_admin ? admin() : httplib::Headers{}, body.dump(), "application/json"));
    }
    Reply put(const std::string& path, const nlohmann::json& body, bool as_admin = true) const {
        return to_reply(client().Put(path, as_admin ? admin() : httplib::Headers{}, body.dump(), "application/json"));
    }
    Reply del(const std::string& path, bool as_admin = true) const {
        return to_reply(client().Delete(path, as_admin ? admin() : httplib::Headers{}));
    }

private:
    TempDir dir_;
    std::optional<std::string> token_;
    std::unique_ptr<portal::PortalService> service_;
};

}  // namespace meshscape::testing
