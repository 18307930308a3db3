#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "meshscape/protocol/entry.hpp"

namespace meshscape::protocol {

// Raised by parse_filter. `offset` is the byte position of the offending token.
class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::size_t offset, std::string expected);

    std::size_t offset() const { return offset_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

/// Search-filter AST in LDAP prefix notation.
///
/// Composite nodes (And, Or, Not) use `children`; leaf nodes use `attr` plus
/// `value` or, for Substring, the `initial` / `any` / `final` components.
/// Attribute names are lowercased on construction. Substring components are
/// never empty strings; at least one must be present.
struct Filter {
    enum class Kind { And, Or, Not, Equality, Presence, GreaterOrEqual, LessOrEqual, Substring };

    Kind kind = Kind::Presence;
    std::string attr;
    std::string value;
    std::optional<std::string> initial;
    std::vector<std::string> any;
    std::optional<std::string> final;
    std::vector<Filter> children;

    static Filter all_of(std::vector<Filter> children);
    static Filter any_of(std::vector<Filter> children);
    static Filter negate(Filter child);
    static Filter equality(std::string_view attr, std::string value);
    static Filter presence(std::string_view attr);
    static Filter greater_or_equal(std::string_view attr, std::string value);
    static Filter less_or_equal(std::string_view attr, std::string value);
    static Filter substring(std::string_view attr, std::optional<std::string> initial,
                            std::vector<std::string> any, std::optional<std::string> final);

    bool operator==(const Filter&) const = default;
};

Filter parse_filter(std::string_view text);
std::string render_filter(const Filter& filter);

// Total and deterministic. Multi-valued attributes match if any value does.
bool match_entry(const Entry& entry, const Filter& filter);

}  // namespace meshscape::protocol
