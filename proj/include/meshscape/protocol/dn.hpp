#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace meshscape::protocol {

class DnError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Rdn {
    std::string name;  // lowercased
    std::string value;

    bool operator==(const Rdn&) const = default;
};

// Distinguished name, most-specific RDN first. Canonical text is
// "name=value, name=value" with names lowercased; `,` `=` `\` and a leading
// space in values are backslash-escaped.
class Dn {
public:
    Dn() = default;
    explicit Dn(std::vector<Rdn> rdns);

    static Dn parse(std::string_view text);

    std::string str() const;
    bool empty() const { return rdns_.empty(); }
    std::size_t depth() const { return rdns_.size(); }
    const std::vector<Rdn>& rdns() const { return rdns_; }

    Dn child(std::string_view name, std::string_view value) const;
    Dn parent() const;

    // Case-insensitive on values as well as names.
    bool same_as(const Dn& other) const;
    // True when `this` lies strictly below `ancestor`.
    bool is_descendant_of(const Dn& ancestor) const;

    bool operator==(const Dn&) const = default;

private:
    std::vector<Rdn> rdns_;
};

}  // namespace meshscape::protocol
