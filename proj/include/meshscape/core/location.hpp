#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meshscape/config/config.hpp"
#include "meshscape/protocol/entry.hpp"

namespace meshscape::core {

using Clock = std::chrono::system_clock;
using Timestamp = Clock::time_point;

enum class Status { Unknown, Up, Down, Stale };

std::string_view to_string(Status status);  // "UNKNOWN", "UP", ...
std::string status_token(Status status);    // lowercased

struct Position {
    double x = 0.5;
    double y = 0.5;

    bool operator==(const Position&) const = default;
};

// One monitored resource and its cached directory data.
struct Location {
    std::string id;
    std::string name;
    std::string address;
    int port = config::kDefaultDirectoryPort;
    Position position;
    std::string country;
    Status status = Status::Unknown;
    std::vector<protocol::Entry> attributes;
    std::optional<Timestamp> last_success;
    std::optional<Timestamp> last_attempt;
    std::optional<std::string> last_error;

    static Location from_pin(const config::ResourcePin& pin);
    config::ResourcePin to_pin() const;

    bool operator==(const Location&) const = default;
};

struct RefreshPolicy {
    std::chrono::milliseconds period{30'000};
    std::chrono::milliseconds per_resource_timeout{5'000};
    double staleness_factor = 3.0;
    int max_parallel_polls = 8;

    std::chrono::milliseconds staleness_bound() const;
    void validate() const;  // throws std::invalid_argument
    static RefreshPolicy with_overrides(RefreshPolicy base, const config::RefreshOverrides& overrides);

    bool operator==(const RefreshPolicy&) const = default;
};

// Immutable once published.
struct Snapshot {
    std::uint64_t version = 0;
    Timestamp taken_at{};
    std::vector<Location> locations;

    const Location* find(std::string_view id) const;
};

using SnapshotPtr = std::shared_ptr<const Snapshot>;

enum class PollErrorKind { Unreachable, Timeout, Remote, Protocol };
std::string_view to_string(PollErrorKind kind);

struct PollSuccess {
    std::vector<protocol::Entry> entries;
    std::chrono::milliseconds duration{0};
};

struct PollFailure {
    PollErrorKind kind = PollErrorKind::Unreachable;
    std::string message;
    std::chrono::milliseconds duration{0};
};

using PollResult = std::variant<PollSuccess, PollFailure>;

// Queries the resource's directory server for its whole tree. Never throws.
PollResult poll_resource(const Location& location, const RefreshPolicy& policy);

Status classify_status(const std::optional<Timestamp>& last_success, const std::optional<Timestamp>& last_attempt,
                       Timestamp now, const RefreshPolicy& policy);

}  // namespace meshscape::core
