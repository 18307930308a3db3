#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "meshscape/config/config.hpp"

namespace meshscape::config {

class DirNotEmpty : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class UnreadableAsset : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct ScaffoldOptions {
    std::string name = "My Testbed";
    // Copied into assets/; a built-in placeholder is written when unset.
    std::optional<std::filesystem::path> map_image;
    std::optional<std::filesystem::path> logo_image;
};

// Creates a blank, immediately servable portal in `dir`, which must be absent
// or empty. All-or-nothing: on failure nothing created is left behind.
// Returns the created files, relative to `dir`.
std::vector<std::filesystem::path> scaffold(const std::filesystem::path& dir, const ScaffoldOptions& options);

// Image type from magic bytes ("png", "jpg", "gif", "svg"), or empty.
std::string sniff_image_type(std::string_view bytes);

}  // namespace meshscape::config
