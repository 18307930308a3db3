#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "meshscape/protocol/message.hpp"
#include "meshscape/protocol/net.hpp"

namespace meshscape::portal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadFilter = 2;
inline constexpr int kExitUnreachable = 3;

// "  (a=\n      ^" style pointer under the offending byte.
std::string caret_diagnostic(const std::string& text, std::size_t offset);

struct QueryOptions {
    std::string filter;
    // Exactly one of these selects the target.
    std::optional<std::filesystem::path> portal_dir;
    std::optional<protocol::Endpoint> endpoint;
    std::vector<std::string> projection;
    std::chrono::milliseconds timeout{5'000};
    std::string base;  // endpoint mode only; empty = root
    protocol::Scope scope = protocol::Scope::Sub;
};

// Portal mode polls every resource once and prints name/status/matched rows.
// Endpoint mode passes the search through and prints the returned entries.
int run_query(const QueryOptions& options, std::ostream& out, std::ostream& err);

struct StatusOptions {
    std::optional<std::filesystem::path> portal_dir;
    std::optional<std::string> url;  // a running portal, e.g. http://127.0.0.1:8080
    std::chrono::milliseconds timeout{5'000};
};

int run_status(const StatusOptions& options, std::ostream& out, std::ostream& err);

}  // namespace meshscape::portal
