#include "meshscape/protocol/entry.hpp"

#include "meshscape/util/strings.hpp"

namespace meshscape::protocol {

void Entry::add(std::string_view name, std::string value) {
    attributes[util::to_lower(name)].push_back(std::move(value));
}

const std::vector<std::string>* Entry::find(std::string_view name) const {
    auto it = attributes.find(util::to_lower(name));
    return it == attributes.end() ? nullptr : &it->second;
}

Entry project(const Entry& entry, const std::vector<std::string>& names) {
    if (names.empty()) return entry;
    Entry out{entry.dn, {}};
    for (const auto& [key, values] : entry.attributes) {
        bool keep = key == "objectclass";
        for (const auto& n : names) keep = keep || util::iequals(n, key);
        if (keep) out.attributes.emplace(key, values);
    }
    return out;
}

}  // namespace meshscape::protocol
