#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "meshscape/config/config.hpp"
#include "meshscape/core/manager.hpp"

namespace httplib {
class Server;
}

namespace meshscape::portal {

inline constexpr std::size_t kMaxUploadBytes = 5 * 1024 * 1024;

// A JSON error reply: {"code": ..., "message": ...}.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }

private:
    int status_;
    std::string code_;
};

struct ServiceConfig {
    std::filesystem::path portal_dir;
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::optional<std::string> admin_token;  // unset disables every admin endpoint
    std::vector<std::string> cors_origins;   // "*" allows any origin
    std::optional<std::filesystem::path> ui_dir;
    // Replaces the defaults the config's refresh overrides are applied over.
    core::RefreshPolicy base_policy;
    std::chrono::milliseconds reload_interval{500};
    core::TestbedManager::Poller poller = core::poll_resource;
};

class StartupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The HTTP portal for one testbed directory.
///
/// Admin mutations are serialized; each writes testbed.conf before the
/// manager publishes the change, and restores the previous file if the
/// manager rejects it.
class PortalService {
public:
    // Loads and validates the portal's config. Throws config errors.
    explicit PortalService(ServiceConfig cfg);
    ~PortalService();

    PortalService(const PortalService&) = delete;
    PortalService& operator=(const PortalService&) = delete;

    // Binds, starts polling, the config watcher and the HTTP listener.
    // Throws StartupError when the address cannot be bound.
    void start();
    void stop();
    // Blocks until stop() is called from another thread.
    void wait();

    int port() const { return bound_port_; }
    core::TestbedManager& manager() { return *manager_; }
    config::TestbedConfig testbed() const;
    std::filesystem::path config_path() const;

    // Re-reads testbed.conf if it changed on disk. Returns true when a new
    // config was applied. Invalid edits are logged and ignored.
    bool reload_if_changed();

private:
    void install_routes();
    void check_admin(const std::string& authorization) const;
    // Persists `next` then applies `change`; restores the old file on failure.
    std::uint64_t commit(const config::TestbedConfig& next, const std::optional<core::TestbedChange>& change);
    void apply_reloaded(const config::TestbedConfig& next);
    void remember_disk_state();
    void watch_loop(std::stop_token stop);

    ServiceConfig cfg_;
    std::unique_ptr<core::TestbedManager> manager_;
    std::unique_ptr<httplib::Server> http_;

    mutable std::mutex admin_mu_;
    config::TestbedConfig testbed_;
    std::string disk_text_;
    std::optional<std::filesystem::file_time_type> disk_mtime_;

    std::atomic<bool> stopping_{false};
    int bound_port_ = 0;
    std::thread listener_;
    std::jthread watcher_;
    std::mutex run_mu_;
    std::condition_variable run_cv_;
    bool running_ = false;
};

}  // namespace meshscape::portal
