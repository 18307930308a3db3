#include "meshscape/provider/profile.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "meshscape/util/document.hpp"
#include "meshscape/util/strings.hpp"

namespace meshscape::provider {

using nlohmann::json;
using protocol::Dn;
using protocol::Entry;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "hostname",  "os-name",    "os-version",    "cpu-model", "cpu-count",
        "memory-total-mb", "fs-total-gb", "fs-free-gb", "net-interconnect", "country",
        "load-one",  "load-five",  "load-fifteen",  "seed"};
    return keys;
}

std::string text_field(const json& doc, const char* key, std::string fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_string()) throw ProfileError(std::string("profile field '") + key + "' must be text");
    return v.get<std::string>();
}

double number_field(const json& doc, const char* key, double fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_number()) throw ProfileError(std::string("profile field '") + key + "' must be a number");
    return v.get<double>();
}

std::int64_t integer_field(const json& doc, const char* key, std::int64_t fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_number_integer()) throw ProfileError(std::string("profile field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

double clamp_step(double value, double step, double hi) { return std::clamp(value + step, 0.0, hi); }

Entry category_entry(const Dn& root, std::string_view category, std::string_view object_class) {
    Entry e{root.child("category", category), {}};
    e.add("objectclass", std::string(object_class));
    e.add("category", std::string(category));
    return e;
}

}  // namespace

void ResourceProfile::validate() const {
    if (hostname.empty()) throw ProfileError("profile hostname must not be empty");
    if (cpu_count < 1) throw ProfileError("cpu-count must be positive");
    if (memory_total_mb < 1) throw ProfileError("memory-total-mb must be positive");
    if (fs_total_gb < 0 || fs_free_gb < 0) throw ProfileError("file system sizes must be non-negative");
    if (fs_free_gb > fs_total_gb) throw ProfileError("fs-free-gb exceeds fs-total-gb");
    for (double load : {load_one, load_five, load_fifteen}) {
        if (load < 0 || load > max_load()) {
            throw ProfileError("initial load " + util::format_number(load) + " outside [0, 4 x cpu-count]");
        }
    }
}

ResourceProfile parse_profile(std::string_view text) {
    json doc;
    try {
        doc = util::parse_document(text);
    } catch (const util::DocumentParseError& e) {
        throw ProfileError(std::string("profile ") + e.what());
    }
    if (!doc.is_object()) throw ProfileError("profile must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (!known_keys().count(key)) throw ProfileError("unknown profile field '" + key + "'");
    }
    if (!doc.contains("hostname")) throw ProfileError("profile field 'hostname' is required");

    ResourceProfile p;
    p.hostname = text_field(doc, "hostname", p.hostname);
    p.os_name = text_field(doc, "os-name", p.os_name);
    p.os_version = text_field(doc, "os-version", p.os_version);
    p.cpu_model = text_field(doc, "cpu-model", p.cpu_model);
    p.cpu_count = integer_field(doc, "cpu-count", p.cpu_count);
    p.memory_total_mb = integer_field(doc, "memory-total-mb", p.memory_total_mb);
    p.fs_total_gb = number_field(doc, "fs-total-gb", p.fs_total_gb);
    p.fs_free_gb = number_field(doc, "fs-free-gb", p.fs_free_gb);
    p.net_interconnect = text_field(doc, "net-interconnect", p.net_interconnect);
    p.country = text_field(doc, "country", p.country);
    p.load_one = number_field(doc, "load-one", p.load_one);
    p.load_five = number_field(doc, "load-five", p.load_five);
    p.load_fifteen = number_field(doc, "load-fifteen", p.load_fifteen);
    if (doc.contains("seed")) {
        const auto& s = doc.at("seed");
        if (!s.is_number_unsigned()) throw ProfileError("profile field 'seed' must be a non-negative integer");
        p.seed = s.get<std::uint64_t>();
    }
    p.validate();
    return p;
}

std::string render_profile(const ResourceProfile& p) {
    json doc = {
        {"hostname", p.hostname},
        {"os-name", p.os_name},
        {"os-version", p.os_version},
        {"cpu-model", p.cpu_model},
        {"cpu-count", p.cpu_count},
        {"memory-total-mb", p.memory_total_mb},
        {"fs-total-gb", p.fs_total_gb},
        {"fs-free-gb", p.fs_free_gb},
        {"net-interconnect", p.net_interconnect},
        {"country", p.country},
        {"load-one", p.load_one},
        {"load-five", p.load_five},
        {"load-fifteen", p.load_fifteen},
        {"seed", p.seed},
    };
    return util::dump_document(doc);
}

ResourceProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProfileError("cannot read profile " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_profile(ss.str());
}

DynamicState::DynamicState(const ResourceProfile& profile)
    : cpu_count_(static_cast<double>(profile.cpu_count)),
      fs_total_gb_(profile.fs_total_gb),
      rng_(profile.seed),
      load_one_(profile.load_one),
      load_five_(profile.load_five),
      load_fifteen_(profile.load_fifteen),
      fs_free_gb_(profile.fs_free_gb) {}

void DynamicState::advance() {
    const double scale = cpu_count_ / 4.0;
    const double hi = 4.0 * cpu_count_;
    load_one_ = clamp_step(load_one_, rng_.uniform(-0.2, 0.2) * scale, hi);
    load_five_ = clamp_step(load_five_, rng_.uniform(-0.2, 0.2) * scale, hi);
    load_fifteen_ = clamp_step(load_fifteen_, rng_.uniform(-0.2, 0.2) * scale, hi);
    fs_free_gb_ = clamp_step(fs_free_gb_, rng_.uniform(-0.01, 0.01) * fs_total_gb_, fs_total_gb_);
    ++tick_;
}

Dn root_dn(const ResourceProfile& profile) { return Dn({{"hn", profile.hostname}, {"o", "grid"}}); }

std::vector<Entry> build_tree(const ResourceProfile& p, const DynamicState& s) {
    using util::format_number;
    const Dn root = root_dn(p);
    std::vector<Entry> tree;
    tree.reserve(7);

    Entry resource{root, {}};
    resource.add("objectclass", "GridResource");
    resource.add("hn", p.hostname);
    if (!p.country.empty()) resource.add("country", p.country);
    tree.push_back(std::move(resource));

    Entry os = category_entry(root, "os", "OsInfo");
    os.add("os-name", p.os_name);
    os.add("os-version", p.os_version);
    tree.push_back(std::move(os));

    Entry cpu = category_entry(root, "cpu", "CpuInfo");
    cpu.add("cpu-model", p.cpu_model);
    cpu.add("cpu-count", std::to_string(p.cpu_count));
    tree.push_back(std::move(cpu));

    Entry memory = category_entry(root, "memory", "MemoryInfo");
    memory.add("memory-total-mb", std::to_string(p.memory_total_mb));
    tree.push_back(std::move(memory));

    Entry fs = category_entry(root, "filesystem", "FilesystemInfo");
    fs.add("fs-total-gb", format_number(p.fs_total_gb));
    fs.add("fs-free-gb", format_number(s.fs_free_gb()));
    tree.push_back(std::move(fs));

    Entry net = category_entry(root, "network", "NetworkInfo");
    net.add("net-interconnect", p.net_interconnect);
    tree.push_back(std::move(net));

    Entry load = category_entry(root, "load", "LoadInfo");
    load.add("load-one", format_number(s.load_one()));
    load.add("load-five", format_number(s.load_five()));
    load.add("load-fifteen", format_number(s.load_fifteen()));
    tree.push_back(std::move(load));

    return tree;
}

std::vector<Entry> collect(const ResourceProfile& profile, std::uint64_t tick) {
    DynamicState state(profile);
    state.advance(tick);
    return build_tree(profile, state);
}

}  // namespace meshscape::provider
