#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "meshscape/config/config.hpp"
#include "meshscape/core/location.hpp"

namespace meshscape::core {

class UnknownResource : public std::runtime_error {
public:
    explicit UnknownResource(const std::string& id) : std::runtime_error("unknown resource '" + id + "'"), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class DuplicateResource : public std::runtime_error {
public:
    explicit DuplicateResource(const std::string& id)
        : std::runtime_error("resource '" + id + "' already exists"), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

struct ChangeEvent {
    std::uint64_t version = 0;
    std::vector<std::string> changed_ids;
};

class SubscriberQueue;

// Receives one event per published version. A consumer that falls more than
// the queue capacity behind sees coalesced events, still in version order.
class Subscription {
public:
    Subscription() = default;
    Subscription(Subscription&&) noexcept = default;
    Subscription& operator=(Subscription&&) noexcept = default;
    ~Subscription();

    std::optional<ChangeEvent> next(std::chrono::milliseconds timeout);
    std::uint64_t token() const { return token_; }
    void cancel();

private:
    friend class TestbedManager;
    Subscription(std::shared_ptr<SubscriberQueue> queue, std::uint64_t token)
        : queue_(std::move(queue)), token_(token) {}

    std::shared_ptr<SubscriberQueue> queue_;
    std::uint64_t token_ = 0;
};

struct ResourceUpdate {
    std::optional<std::string> name;
    std::optional<std::string> address;
    std::optional<int> port;
    std::optional<Position> position;
    std::optional<std::string> country;
};

struct AddResource {
    config::ResourcePin pin;
};
struct UpdateResource {
    std::string id;
    ResourceUpdate fields;
};
struct RemoveResource {
    std::string id;
};
using TestbedChange = std::variant<AddResource, UpdateResource, RemoveResource>;

/// The shared monitoring cache for one testbed.
///
/// Holds the current Snapshot and replaces it wholesale on every change, so
/// readers always see one consistent publication. Poll I/O happens outside the
/// write lock; applies and mutations are serialized against each other.
/// A background scheduler (start/stop) polls every resource once per period.
class TestbedManager {
public:
    using Poller = std::function<PollResult(const Location&, const RefreshPolicy&)>;

    // Throws config::ValidationError for an invalid config, std::invalid_argument
    // for an invalid policy. The scheduler is not started.
    TestbedManager(const config::TestbedConfig& cfg, RefreshPolicy policy, Poller poller = poll_resource);
    ~TestbedManager();

    TestbedManager(const TestbedManager&) = delete;
    TestbedManager& operator=(const TestbedManager&) = delete;

    void start();
    void stop();

    SnapshotPtr snapshot() const;
    const RefreshPolicy& policy() const { return policy_; }

    std::uint64_t apply_poll_result(const std::string& id, const PollResult& result, Timestamp now);
    // Polls one resource (or all, bounded by max_parallel_polls) and returns
    // the version published after the last result was applied.
    std::uint64_t refresh_now(const std::optional<std::string>& id = std::nullopt);
    std::uint64_t mutate(const TestbedChange& change);

    Subscription subscribe();
    void unsubscribe(std::uint64_t token);

    // Blocks until a version greater than `after` is published or timeout.
    std::uint64_t await_version(std::uint64_t after, std::chrono::milliseconds timeout) const;

private:
    struct PollJob {
        Location location;
        std::uint64_t epoch;
    };

    std::vector<PollJob> jobs_for(const std::optional<std::string>& id) const;
    std::uint64_t run_jobs(const std::vector<PollJob>& jobs);
    std::optional<std::uint64_t> apply_checked(const std::string& id, const PollResult& result, Timestamp now,
                                               std::optional<std::uint64_t> epoch);
    std::uint64_t publish_locked(std::vector<Location> locations, std::vector<std::string> changed, Timestamp at);
    void scheduler_loop(std::stop_token stop);

    RefreshPolicy policy_;
    Poller poller_;

    mutable std::mutex snapshot_mu_;  // guards only the pointer swap
    SnapshotPtr current_;
    mutable std::condition_variable version_cv_;

    mutable std::mutex write_mu_;
    std::map<std::string, std::uint64_t> epochs_;  // bumped on endpoint change or removal
    std::uint64_t next_epoch_ = 1;

    std::mutex subscribers_mu_;
    std::map<std::uint64_t, std::weak_ptr<SubscriberQueue>> subscribers_;
    std::uint64_t next_token_ = 1;

    std::mutex scheduler_mu_;
    std::jthread scheduler_;
};

}  // namespace meshscape::core
