#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace meshscape::config {

inline constexpr int kFormatVersion = 1;
// Historical grid information service port; only a default for new pins.
inline constexpr int kDefaultDirectoryPort = 2135;
inline constexpr std::string_view kConfigFileName = "testbed.conf";
inline constexpr std::string_view kAssetsDir = "assets";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class ParseError : public ConfigError {
public:
    ParseError(std::size_t line, std::string message)
        : ConfigError("line " + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public ConfigError {
public:
    explicit ValidationError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

class UnsupportedVersion : public ConfigError {
public:
    explicit UnsupportedVersion(std::int64_t version)
        : ConfigError("unsupported format_version " + std::to_string(version)), version_(version) {}
    std::int64_t version() const { return version_; }

private:
    std::int64_t version_;
};

// Optional refresh-policy overrides; unset fields fall back to defaults.
struct RefreshOverrides {
    std::optional<std::int64_t> period_ms;
    std::optional<std::int64_t> timeout_ms;
    std::optional<double> staleness_factor;
    std::optional<std::int64_t> max_parallel_polls;

    bool operator==(const RefreshOverrides&) const = default;
};

struct ResourcePin {
    std::string id;
    std::string name;
    std::string address;
    int port = kDefaultDirectoryPort;
    double x = 0.5;  // normalized to the map image, [0, 1]
    double y = 0.5;
    std::string country;

    bool operator==(const ResourcePin&) const = default;
};

struct TestbedConfig {
    int format_version = kFormatVersion;
    std::string name;
    std::string logo_path;  // relative to the portal directory; empty = none
    std::string map_path;
    RefreshOverrides refresh;
    std::vector<ResourcePin> resources;

    const ResourcePin* find(std::string_view id) const;
    ResourcePin* find(std::string_view id);

    bool operator==(const TestbedConfig&) const = default;
};

bool is_valid_resource_id(std::string_view id);
// Relative, no `..` components, no absolute or drive prefix.
bool is_safe_asset_path(std::string_view path);

std::vector<std::string> pin_problems(const ResourcePin& pin);
std::vector<std::string> validation_problems(const TestbedConfig& cfg);
void validate(const TestbedConfig& cfg);  // throws ValidationError

// Canonical text: sorted keys, two-space indent, trailing newline.
std::string render_config(const TestbedConfig& cfg);
// Parses and validates. Throws ParseError, UnsupportedVersion, ValidationError.
TestbedConfig parse_config(std::string_view text);

TestbedConfig load_config(const std::filesystem::path& path);

// Steps of an atomic save, reported to the fault hook in order.
enum class SaveStep { TempCreated, PartiallyWritten, Written, Synced, Renamed };
using FaultHook = std::function<void(SaveStep)>;

// Validates, then writes a temporary sibling and renames it over `path`.
void save_config(const std::filesystem::path& path, const TestbedConfig& cfg, const FaultHook& hook = {});

// Replaces `path` with `data` via temp file + fsync + rename.
void write_file_atomically(const std::filesystem::path& path, std::string_view data, const FaultHook& hook = {});

ResourcePin default_pin(double x, double y);

}  // namespace meshscape::config
