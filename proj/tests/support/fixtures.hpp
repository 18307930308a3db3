#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "meshscape/protocol/frame.hpp"
#include "meshscape/provider/servers.hpp"

namespace meshscape::testing {

inline provider::ResourceProfile fixture_profile(const std::string& host, std::uint64_t seed, std::int64_t cpus = 4) {
    provider::ResourceProfile p;
    p.hostname = host;
    p.cpu_count = cpus;
    p.memory_total_mb = 4096 * cpus;
    p.fs_total_gb = 200;
    p.fs_free_gb = 80;
    p.cpu_model = "Opteron";
    p.country = "Australia";
    p.load_one = 0.5;
    p.load_five = 0.4;
    p.load_fifteen = 0.3;
    p.seed = seed;
    return p;
}

inline std::unique_ptr<provider::AgentServer> start_agent(const std::string& host, std::uint64_t seed,
                                                           std::function<void(provider::AgentOptions&)> tweak = {}) {
    provider::AgentOptions o;
    o.profile = fixture_profile(host, seed);
    if (tweak) tweak(o);
    auto agent = std::make_unique<provider::AgentServer>(std::move(o));
    agent->start();
    return agent;
}

// Polls `pred` every 10 ms until it holds or `limit` passes.
inline bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds limit) {
    const auto deadline = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return pred();
}

// Canonical bodies, sorted: multiset identity of entry lists.
inline std::vector<std::string> entry_multiset(const std::vector<protocol::Entry>& entries) {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(protocol::encode_body(protocol::SearchEntry{1, e}));
    std::sort(out.begin(), out.end());
    return out;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("meshscape-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

}  // namespace meshscape::testing
