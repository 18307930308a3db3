#include "meshscape/core/manager.hpp"

#include <algorithm>
#include <condition_variable>
#include <set>

#include "meshscape/util/parallel.hpp"

namespace meshscape::core {

class SubscriberQueue {
public:
    static constexpr std::size_t kCapacity = 256;

    void push(ChangeEvent event) {
        {
            std::lock_guard lock(mu_);
            if (closed_) return;
            if (events_.size() >= kCapacity) {
                // coalesce into the newest pending event
                ChangeEvent& back = events_.back();
                back.version = event.version;
                for (auto& id : event.changed_ids) {
                    if (std::find(back.changed_ids.begin(), back.changed_ids.end(), id) == back.changed_ids.end()) {
                        back.changed_ids.push_back(std::move(id));
                    }
                }
            } else {
                events_.push_back(std::move(event));
            }
        }
        cv_.notify_all();
    }

    std::optional<ChangeEvent> pop(std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        if (!cv_.wait_for(lock, timeout, [&] { return !events_.empty() || closed_; })) return std::nullopt;
        if (events_.empty()) return std::nullopt;
        ChangeEvent ev = std::move(events_.front());
        events_.pop_front();
        return ev;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<ChangeEvent> events_;
    bool closed_ = false;
};

Subscription::~Subscription() { cancel(); }

std::optional<ChangeEvent> Subscription::next(std::chrono::milliseconds timeout) {
    if (!queue_) return std::nullopt;
    return queue_->pop(timeout);
}

void Subscription::cancel() {
    if (queue_) {
        queue_->close();
        queue_.reset();
    }
}

TestbedManager::TestbedManager(const config::TestbedConfig& cfg, RefreshPolicy policy, Poller poller)
    : policy_(policy), poller_(std::move(poller)) {
    config::validate(cfg);
    policy_.validate();
    auto initial = std::make_shared<Snapshot>();
    initial->version = 1;
    initial->taken_at = Clock::now();
    for (const auto& pin : cfg.resources) {
        initial->locations.push_back(Location::from_pin(pin));
        epochs_[pin.id] = next_epoch_++;
    }
    current_ = std::move(initial);
}

TestbedManager::~TestbedManager() {
    stop();
    std::lock_guard lock(subscribers_mu_);
    for (auto& [token, weak] : subscribers_) {
        if (auto q = weak.lock()) q->close();
    }
}

void TestbedManager::start() {
    std::lock_guard lock(scheduler_mu_);
    if (scheduler_.joinable()) return;
    scheduler_ = std::jthread([this](std::stop_token stop) { scheduler_loop(stop); });
}

void TestbedManager::stop() {
    std::jthread scheduler;
    {
        std::lock_guard lock(scheduler_mu_);
        scheduler = std::move(scheduler_);
    }
    // destructor requests stop and joins
}

SnapshotPtr TestbedManager::snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return current_;
}

std::uint64_t TestbedManager::publish_locked(std::vector<Location> locations, std::vector<std::string> changed,
                                             Timestamp at) {
    auto next = std::make_shared<Snapshot>();
    next->locations = std::move(locations);
    next->taken_at = std::max(Clock::now(), at);
    std::uint64_t version = 0;
    {
        std::lock_guard lock(snapshot_mu_);
        version = current_->version + 1;
        next->version = version;
        current_ = std::move(next);
    }
    version_cv_.notify_all();

    std::lock_guard lock(subscribers_mu_);
    for (auto it = subscribers_.begin(); it != subscribers_.end();) {
        if (auto q = it->second.lock()) {
            q->push(ChangeEvent{version, changed});
            ++it;
        } else {
            it = subscribers_.erase(it);
        }
    }
    return version;
}

std::optional<std::uint64_t> TestbedManager::apply_checked(const std::string& id, const PollResult& result,
                                                           Timestamp now, std::optional<std::uint64_t> epoch) {
    std::lock_guard lock(write_mu_);
    if (epoch) {
        auto it = epochs_.find(id);
        if (it == epochs_.end() || it->second != *epoch) return std::nullopt;
    }
    const SnapshotPtr base = snapshot();
    std::vector<Location> locations = base->locations;
    auto loc = std::find_if(locations.begin(), locations.end(), [&](const Location& l) { return l.id == id; });
    if (loc == locations.end()) {
        if (epoch) return std::nullopt;
        throw UnknownResource(id);
    }
    loc->last_attempt = now;
    if (const auto* ok = std::get_if<PollSuccess>(&result)) {
        loc->attributes = ok->entries;
        loc->last_success = now;
        loc->last_error.reset();
        loc->status = Status::Up;
    } else {
        const auto& failure = std::get<PollFailure>(result);
        loc->last_error = std::string(to_string(failure.kind)) + ": " + failure.message;
        loc->status = classify_status(loc->last_success, loc->last_attempt, now, policy_);
    }
    return publish_locked(std::move(locations), {id}, now);
}

std::uint64_t TestbedManager::apply_poll_result(const std::string& id, const PollResult& result, Timestamp now) {
    return *apply_checked(id, result, now, std::nullopt);
}

std::vector<TestbedManager::PollJob> TestbedManager::jobs_for(const std::optional<std::string>& id) const {
    std::lock_guard lock(write_mu_);
    const SnapshotPtr snap = snapshot();
    std::vector<PollJob> jobs;
    for (const auto& loc : snap->locations) {
        if (id && loc.id != *id) continue;
        jobs.push_back(PollJob{loc, epochs_.at(loc.id)});
    }
    if (id && jobs.empty()) throw UnknownResource(*id);
    return jobs;
}

std::uint64_t TestbedManager::run_jobs(const std::vector<PollJob>& jobs) {
    std::mutex mu;
    std::uint64_t latest = 0;
    util::parallel_for(jobs.size(), static_cast<std::size_t>(policy_.max_parallel_polls), [&](std::size_t i) {
        const auto& job = jobs[i];
        PollResult result = poller_(job.location, policy_);
        std::optional<std::uint64_t> version;
        try {
            version = apply_checked(job.location.id, result, Clock::now(), job.epoch);
        } catch (const std::exception&) {
            // resource vanished mid-poll; nothing to record
        }
        if (version) {
            std::lock_guard lock(mu);
            latest = std::max(latest, *version);
        }
    });
    return latest == 0 ? snapshot()->version : latest;
}

std::uint64_t TestbedManager::refresh_now(const std::optional<std::string>& id) { return run_jobs(jobs_for(id)); }

std::uint64_t TestbedManager::mutate(const TestbedChange& change) {
    std::lock_guard lock(write_mu_);
    const SnapshotPtr base = snapshot();
    std::vector<Location> locations = base->locations;
    auto find = [&](const std::string& id) {
        return std::find_if(locations.begin(), locations.end(), [&](const Location& l) { return l.id == id; });
    };

    if (const auto* add = std::get_if<AddResource>(&change)) {
        if (find(add->pin.id) != locations.end()) throw DuplicateResource(add->pin.id);
        if (auto problems = config::pin_problems(add->pin); !problems.empty()) {
            throw config::ValidationError(std::move(problems));
        }
        locations.push_back(Location::from_pin(add->pin));
        epochs_[add->pin.id] = next_epoch_++;
        return publish_locked(std::move(locations), {add->pin.id}, Clock::now());
    }

    if (const auto* update = std::get_if<UpdateResource>(&change)) {
        auto loc = find(update->id);
        if (loc == locations.end()) throw UnknownResource(update->id);
        Location edited = *loc;
        const auto& f = update->fields;
        if (f.name) edited.name = *f.name;
        if (f.address) edited.address = *f.address;
        if (f.port) edited.port = *f.port;
        if (f.position) edited.position = *f.position;
        if (f.country) edited.country = *f.country;
        if (auto problems = config::pin_problems(edited.to_pin()); !problems.empty()) {
            throw config::ValidationError(std::move(problems));
        }
        if (edited.address != loc->address || edited.port != loc->port) {
            edited.status = Status::Unknown;
            edited.attributes.clear();
            edited.last_success.reset();
            edited.last_attempt.reset();
            edited.last_error.reset();
            epochs_[edited.id] = next_epoch_++;
        }
        *loc = std::move(edited);
        return publish_locked(std::move(locations), {update->id}, Clock::now());
    }

    const auto& remove = std::get<RemoveResource>(change);
    auto loc = find(remove.id);
    if (loc == locations.end()) throw UnknownResource(remove.id);
    locations.erase(loc);
    epochs_.erase(remove.id);
    return publish_locked(std::move(locations), {remove.id}, Clock::now());
}

Subscription TestbedManager::subscribe() {
    auto queue = std::make_shared<SubscriberQueue>();
    std::lock_guard lock(subscribers_mu_);
    const std::uint64_t token = next_token_++;
    subscribers_[token] = queue;
    return Subscription(std::move(queue), token);
}

void TestbedManager::unsubscribe(std::uint64_t token) {
    std::lock_guard lock(subscribers_mu_);
    auto it = subscribers_.find(token);
    if (it == subscribers_.end()) return;
    if (auto q = it->second.lock()) q->close();
    subscribers_.erase(it);
}

std::uint64_t TestbedManager::await_version(std::uint64_t after, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(snapshot_mu_);
    version_cv_.wait_for(lock, timeout, [&] { return current_->version > after; });
    return current_->version;
}

void TestbedManager::scheduler_loop(std::stop_token stop) {
    std::mutex mu;
    std::condition_variable_any cv;
    while (!stop.stop_requested()) {
        const auto round_start = std::chrono::steady_clock::now();
        try {
            run_jobs(jobs_for(std::nullopt));
        } catch (const std::exception&) {
            // a resource removed between listing and polling; next round picks up the new set
        }
        std::unique_lock lock(mu);
        cv.wait_until(lock, stop, round_start + policy_.period, [] { return false; });
    }
}

}  // namespace meshscape::core
