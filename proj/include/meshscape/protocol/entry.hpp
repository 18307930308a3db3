#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "meshscape/protocol/dn.hpp"

namespace meshscape::protocol {

// Keys are lowercased attribute names; values keep insertion order.
using AttributeMap = std::map<std::string, std::vector<std::string>>;

struct Entry {
    Dn dn;
    AttributeMap attributes;

    void add(std::string_view name, std::string value);
    const std::vector<std::string>* find(std::string_view name) const;

    bool operator==(const Entry&) const = default;
};

// Keeps only `names` (plus objectclass); an empty list keeps everything.
Entry project(const Entry& entry, const std::vector<std::string>& names);

}  // namespace meshscape::protocol
