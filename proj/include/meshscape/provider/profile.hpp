#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "meshscape/protocol/entry.hpp"
#include "meshscape/provider/prng.hpp"

namespace meshscape::provider {

class ProfileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Static description and initial dynamic state of one simulated resource.
struct ResourceProfile {
    std::string hostname = "localhost";
    std::string os_name = "Linux";
    std::string os_version = "6.1";
    std::string cpu_model = "generic";
    std::int64_t cpu_count = 1;
    std::int64_t memory_total_mb = 1024;
    double fs_total_gb = 100;
    double fs_free_gb = 50;
    std::string net_interconnect = "ethernet";
    std::string country;
    double load_one = 0;
    double load_five = 0;
    double load_fifteen = 0;
    std::uint64_t seed = 0;

    double max_load() const { return 4.0 * static_cast<double>(cpu_count); }
    void validate() const;  // throws ProfileError

    bool operator==(const ResourceProfile&) const = default;
};

ResourceProfile parse_profile(std::string_view text);
std::string render_profile(const ResourceProfile& profile);
ResourceProfile load_profile(const std::filesystem::path& path);

// Dynamic values after `tick` steps of the clamped random walk.
//
// Each step draws, in order, one uniform step for load-one, load-five,
// load-fifteen, then one for fs-free-gb:
//   load  <- clamp(load + U(-0.2, 0.2) * cpu_count / 4, 0, 4 * cpu_count)
//   free  <- clamp(free + U(-0.01, 0.01) * fs_total,    0, fs_total)
class DynamicState {
public:
    explicit DynamicState(const ResourceProfile& profile);

    void advance();
    void advance(std::uint64_t steps) {
        for (std::uint64_t i = 0; i < steps; ++i) advance();
    }

    std::uint64_t tick() const { return tick_; }
    double load_one() const { return load_one_; }
    double load_five() const { return load_five_; }
    double load_fifteen() const { return load_fifteen_; }
    double fs_free_gb() const { return fs_free_gb_; }

private:
    double cpu_count_;
    double fs_total_gb_;
    SplitMix64 rng_;
    std::uint64_t tick_ = 0;
    double load_one_;
    double load_five_;
    double load_fifteen_;
    double fs_free_gb_;
};

inline constexpr std::string_view kCategories[] = {"os", "cpu", "memory", "filesystem", "network", "load"};

protocol::Dn root_dn(const ResourceProfile& profile);

// The 7-entry tree: root `hn=<host>, o=grid` then one child per category.
std::vector<protocol::Entry> build_tree(const ResourceProfile& profile, const DynamicState& state);

std::vector<protocol::Entry> collect(const ResourceProfile& profile, std::uint64_t tick);

}  // namespace meshscape::provider
