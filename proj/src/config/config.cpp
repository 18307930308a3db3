#include "meshscape/config/config.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "meshscape/util/document.hpp"
#include "meshscape/util/strings.hpp"

namespace meshscape::config {

using nlohmann::json;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out = "invalid testbed config";
    for (const auto& p : problems) out += "; " + p;
    return out;
}

std::string pin_label(const ResourcePin& pin, std::size_t index) {
    return pin.id.empty() ? "resource #" + std::to_string(index) : "resource '" + pin.id + "'";
}

// Collects type problems while reading a JSON document into a config.
class Reader {
public:
    std::vector<std::string> problems;

    void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
        for (const auto& [key, value] : obj.items()) {
            if (!allowed.count(key)) problems.push_back(where + ": unknown field '" + key + "'");
        }
    }

    void text(const json& obj, const char* key, const std::string& where, std::string& out, bool required) {
        if (!obj.contains(key)) {
            if (required) problems.push_back(where + ": missing field '" + key + "'");
            return;
        }
        const auto& v = obj.at(key);
        if (!v.is_string()) {
            problems.push_back(where + ": field '" + key + "' must be text");
            return;
        }
        out = v.get<std::string>();
    }

    template <typename Int>
    void integer(const json& obj, const char* key, const std::string& where, Int& out, bool required) {
        if (!obj.contains(key)) {
            if (required) problems.push_back(where + ": missing field '" + key + "'");
            return;
        }
        const auto& v = obj.at(key);
        if (!v.is_number_integer() ||
            (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))) {
            problems.push_back(where + ": field '" + key + "' must be an integer");
            return;
        }
        const std::int64_t value = v.get<std::int64_t>();
        if constexpr (sizeof(Int) < sizeof(std::int64_t)) {
            if (value < INT32_MIN || value > INT32_MAX) {
                problems.push_back(where + ": " + key + " " + std::to_string(value) + " out of range");
                return;
            }
        }
        out = static_cast<Int>(value);
    }

    void number(const json& obj, const char* key, const std::string& where, double& out, bool required) {
        if (!obj.contains(key)) {
            if (required) problems.push_back(where + ": missing field '" + key + "'");
            return;
        }
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            problems.push_back(where + ": field '" + key + "' must be a number");
            return;
        }
        out = v.get<double>();
    }
};

struct FdCloser {
    int fd = -1;
    ~FdCloser() {
        if (fd >= 0) ::close(fd);
    }
};

void write_all(int fd, std::string_view data, const std::filesystem::path& tmp) {
    std::size_t done = 0;
    while (done < data.size()) {
        const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("cannot write " + tmp.string() + ": " + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : ConfigError(join_problems(problems)), problems_(std::move(problems)) {}

const ResourcePin* TestbedConfig::find(std::string_view id) const {
    for (const auto& pin : resources) {
        if (pin.id == id) return &pin;
    }
    return nullptr;
}

ResourcePin* TestbedConfig::find(std::string_view id) {
    for (auto& pin : resources) {
        if (pin.id == id) return &pin;
    }
    return nullptr;
}

bool is_valid_resource_id(std::string_view id) {
    if (id.empty() || id.size() > 128) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
               c == '_' || c == '.';
    });
}

bool is_safe_asset_path(std::string_view path) {
    if (path.empty()) return true;
    if (path.front() == '/' || path.front() == '\\') return false;
    if (path.size() >= 2 && path[1] == ':') return false;
    if (path.find('\0') != std::string_view::npos) return false;
    std::size_t start = 0;
    while (start <= path.size()) {
        const std::size_t end = path.find_first_of("/\\", start);
        const std::string_view part = path.substr(start, end == std::string_view::npos ? std::string_view::npos
                                                                                     : end - start);
        if (part == "..") return false;
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return true;
}

std::vector<std::string> pin_problems(const ResourcePin& pin) {
    std::vector<std::string> problems;
    const std::string label = pin.id.empty() ? std::string("resource") : "resource '" + pin.id + "'";
    if (!is_valid_resource_id(pin.id)) problems.push_back(label + ": id must match [A-Za-z0-9._-]{1,128}");
    if (pin.address.empty()) problems.push_back(label + ": address must not be empty");
    if (pin.port < 1 || pin.port > 65535) {
        problems.push_back(label + ": port " + std::to_string(pin.port) + " out of range [1, 65535]");
    }
    for (const auto& [axis, value] : {std::pair{"x", pin.x}, std::pair{"y", pin.y}}) {
        if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
            problems.push_back(label + ": " + axis + " " + util::format_number(value) + " outside [0, 1]");
        }
    }
    return problems;
}

std::vector<std::string> validation_problems(const TestbedConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.format_version != kFormatVersion) {
        problems.push_back("format_version " + std::to_string(cfg.format_version) + " is not supported");
    }
    for (const auto& [field, path] : {std::pair{"logo_path", &cfg.logo_path}, std::pair{"map_path", &cfg.map_path}}) {
        if (!is_safe_asset_path(*path)) {
            problems.push_back(std::string(field) + ": '" + *path + "' must stay inside the portal directory");
        }
    }
    const auto& r = cfg.refresh;
    if (r.period_ms && *r.period_ms <= 0) problems.push_back("refresh.period_ms must be positive");
    if (r.timeout_ms && *r.timeout_ms <= 0) problems.push_back("refresh.timeout_ms must be positive");
    if (r.period_ms && r.timeout_ms && *r.timeout_ms >= *r.period_ms) {
        problems.push_back("refresh.timeout_ms must be less than refresh.period_ms");
    }
    if (r.staleness_factor && !(*r.staleness_factor >= 1.0 && std::isfinite(*r.staleness_factor))) {
        problems.push_back("refresh.staleness_factor must be at least 1");
    }
    if (r.max_parallel_polls && *r.max_parallel_polls < 1) {
        problems.push_back("refresh.max_parallel_polls must be positive");
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < cfg.resources.size(); ++i) {
        const auto& pin = cfg.resources[i];
        for (auto& p : pin_problems(pin)) problems.push_back(std::move(p));
        if (!pin.id.empty() && !seen.insert(pin.id).second) {
            problems.push_back(pin_label(pin, i) + ": duplicate id");
        }
    }
    return problems;
}

void validate(const TestbedConfig& cfg) {
    auto problems = validation_problems(cfg);
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::string render_config(const TestbedConfig& cfg) {
    json refresh = json::object();
    if (cfg.refresh.period_ms) refresh["period_ms"] = *cfg.refresh.period_ms;
    if (cfg.refresh.timeout_ms) refresh["timeout_ms"] = *cfg.refresh.timeout_ms;
    if (cfg.refresh.staleness_factor) refresh["staleness_factor"] = *cfg.refresh.staleness_factor;
    if (cfg.refresh.max_parallel_polls) refresh["max_parallel_polls"] = *cfg.refresh.max_parallel_polls;

    json resources = json::array();
    for (const auto& pin : cfg.resources) {
        resources.push_back({{"id", pin.id},
                             {"name", pin.name},
                             {"address", pin.address},
                             {"port", pin.port},
                             {"x", pin.x},
                             {"y", pin.y},
                             {"country", pin.country}});
    }
    json doc = {{"format_version", cfg.format_version},
                {"name", cfg.name},
                {"logo_path", cfg.logo_path},
                {"map_path", cfg.map_path},
                {"refresh", refresh},
                {"resources", resources}};
    return util::dump_document(doc);
}

TestbedConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = util::parse_document(text);
    } catch (const util::DocumentParseError& e) {
        throw ParseError(e.line(), e.message());
    }
    if (!doc.is_object()) throw ParseError(1, "top level must be an object");

    const auto version_it = doc.find("format_version");
    if (version_it == doc.end() || !version_it->is_number_integer()) {
        throw ValidationError({"missing or non-integer format_version"});
    }
    const bool known = version_it->is_number_unsigned() ? version_it->get<std::uint64_t>() == kFormatVersion
                                                        : version_it->get<std::int64_t>() == kFormatVersion;
    if (!known) throw UnsupportedVersion(version_it->get<std::int64_t>());

    TestbedConfig cfg;
    Reader rd;
    rd.check_keys(doc, "testbed", {"format_version", "name", "logo_path", "map_path", "refresh", "resources"});
    rd.text(doc, "name", "testbed", cfg.name, true);
    rd.text(doc, "logo_path", "testbed", cfg.logo_path, false);
    rd.text(doc, "map_path", "testbed", cfg.map_path, false);

    if (doc.contains("refresh")) {
        const auto& r = doc.at("refresh");
        if (!r.is_object()) {
            rd.problems.push_back("refresh must be an object");
        } else {
            rd.check_keys(r, "refresh", {"period_ms", "timeout_ms", "staleness_factor", "max_parallel_polls"});
            std::int64_t iv = 0;
            double dv = 0;
            if (r.contains("period_ms")) {
                rd.integer(r, "period_ms", "refresh", iv, true);
                cfg.refresh.period_ms = iv;
            }
            if (r.contains("timeout_ms")) {
                rd.integer(r, "timeout_ms", "refresh", iv, true);
                cfg.refresh.timeout_ms = iv;
            }
            if (r.contains("staleness_factor")) {
                rd.number(r, "staleness_factor", "refresh", dv, true);
                cfg.refresh.staleness_factor = dv;
            }
            if (r.contains("max_parallel_polls")) {
                rd.integer(r, "max_parallel_polls", "refresh", iv, true);
                cfg.refresh.max_parallel_polls = iv;
            }
        }
    }

    if (doc.contains("resources")) {
        const auto& list = doc.at("resources");
        if (!list.is_array()) {
            rd.problems.push_back("resources must be a list");
        } else {
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto& item = list.at(i);
                std::string where = "resources[" + std::to_string(i) + "]";
                if (!item.is_object()) {
                    rd.problems.push_back(where + " must be an object");
                    continue;
                }
                ResourcePin pin;
                rd.text(item, "id", where, pin.id, true);
                if (!pin.id.empty()) where = "resource '" + pin.id + "'";
                rd.check_keys(item, where, {"id", "name", "address", "port", "x", "y", "country"});
                rd.text(item, "name", where, pin.name, true);
                rd.text(item, "address", where, pin.address, true);
                rd.integer(item, "port", where, pin.port, true);
                rd.number(item, "x", where, pin.x, true);
                rd.number(item, "y", where, pin.y, true);
                rd.text(item, "country", where, pin.country, false);
                cfg.resources.push_back(std::move(pin));
            }
        }
    }
    for (auto& p : validation_problems(cfg)) rd.problems.push_back(std::move(p));
    if (!rd.problems.empty()) throw ValidationError(std::move(rd.problems));
    return cfg;
}

TestbedConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return parse_config(ss.str());
}

void write_file_atomically(const std::filesystem::path& path, std::string_view data, const FaultHook& hook) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::string tmpl = (dir / ("." + path.filename().string() + ".tmp.XXXXXX")).string();
    FdCloser file{::mkstemp(tmpl.data())};
    if (file.fd < 0) throw IoError("cannot create temporary file next to " + path.string() + ": " + std::strerror(errno));
    const std::filesystem::path tmp = tmpl;
    bool committed = false;
    struct TempRemover {
        const std::filesystem::path& tmp;
        const bool& committed;
        ~TempRemover() {
            if (!committed) ::unlink(tmp.c_str());
        }
    } remover{tmp, committed};

    auto step = [&](SaveStep s) {
        if (hook) hook(s);
    };
    ::fchmod(file.fd, 0644);
    step(SaveStep::TempCreated);
    const std::size_t half = data.size() / 2;
    write_all(file.fd, data.substr(0, half), tmp);
    step(SaveStep::PartiallyWritten);
    write_all(file.fd, data.substr(half), tmp);
    step(SaveStep::Written);
    if (::fsync(file.fd) != 0) throw IoError("cannot sync " + tmp.string() + ": " + std::strerror(errno));
    step(SaveStep::Synced);
    ::close(file.fd);
    file.fd = -1;
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot replace " + path.string() + ": " + std::strerror(errno));
    }
    committed = true;
    FdCloser dirfd{::open(dir.c_str(), O_RDONLY | O_DIRECTORY)};
    if (dirfd.fd >= 0) ::fsync(dirfd.fd);
    step(SaveStep::Renamed);
}

void save_config(const std::filesystem::path& path, const TestbedConfig& cfg, const FaultHook& hook) {
    validate(cfg);
    write_file_atomically(path, render_config(cfg), hook);
}

ResourcePin default_pin(double x, double y) {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = [] {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }();
    const std::uint64_t n = counter++;
    std::uint64_t mixed = salt + n * 0x9e3779b97f4a7c15ULL;
    mixed = (mixed ^ (mixed >> 31)) * 0xbf58476d1ce4e5b9ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mixed ^ (mixed >> 29)));

    ResourcePin pin;
    pin.id = "r-" + std::string(buf, 10) + "-" + std::to_string(n);
    pin.name = "New Resource";
    pin.address = "localhost";
    pin.port = kDefaultDirectoryPort;
    pin.x = x;
    pin.y = y;
    return pin;
}

}  // namespace meshscape::config
