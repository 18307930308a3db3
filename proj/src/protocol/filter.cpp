#include "meshscape/protocol/filter.hpp"

#include <algorithm>

#include "meshscape/util/strings.hpp"

namespace meshscape::protocol {

SyntaxError::SyntaxError(std::size_t offset, std::string expected)
    : std::runtime_error("filter syntax error at offset " + std::to_string(offset) + ": expected " +
                         expected),
      offset_(offset),
      expected_(std::move(expected)) {}

namespace {

std::string checked_attr(std::string_view attr) {
    if (!util::is_attr_name(attr)) {
        throw std::invalid_argument("invalid attribute name '" + std::string(attr) + "'");
    }
    return util::to_lower(attr);
}

Filter leaf(Filter::Kind kind, std::string_view attr, std::string value) {
    Filter f;
    f.kind = kind;
    f.attr = checked_attr(attr);
    f.value = std::move(value);
    return f;
}

Filter composite(Filter::Kind kind, std::vector<Filter> children) {
    if (children.empty()) throw std::invalid_argument("composite filter needs at least one child");
    Filter f;
    f.kind = kind;
    f.children = std::move(children);
    return f;
}

constexpr std::size_t kMaxDepth = 128;

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Filter parse() {
        Filter f = filter(0);
        if (pos_ != text_.size()) fail("end of input");
        return f;
    }

private:
    [[noreturn]] void fail(std::string expected) const { throw SyntaxError(pos_, std::move(expected)); }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    void expect(char c) {
        if (at_end() || peek() != c) fail(std::string("'") + c + "'");
        ++pos_;
    }

    Filter filter(std::size_t depth) {
        if (depth > kMaxDepth) fail("shallower nesting");
        expect('(');
        if (at_end()) fail("filter component");
        Filter f;
        switch (peek()) {
            case '&':
                ++pos_;
                f = composite(Filter::Kind::And, filter_list(depth));
                break;
            case '|':
                ++pos_;
                f = composite(Filter::Kind::Or, filter_list(depth));
                break;
            case '!':
                ++pos_;
                f = Filter::negate(filter(depth + 1));
                break;
            default:
                f = item();
                break;
        }
        expect(')');
        return f;
    }

    std::vector<Filter> filter_list(std::size_t depth) {
        std::vector<Filter> children;
        while (!at_end() && peek() == '(') children.push_back(filter(depth + 1));
        if (children.empty()) fail("'(' starting a nested filter");
        return children;
    }

    std::string attr() {
        const std::size_t start = pos_;
        auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
        if (at_end() || !alpha(peek())) fail("attribute name");
        while (!at_end() && (alpha(peek()) || (peek() >= '0' && peek() <= '9') || peek() == '-')) ++pos_;
        return util::to_lower(text_.substr(start, pos_ - start));
    }

    static int hex_digit(char c) {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    }

    // Reads value text up to the closing ')'. Unescaped '*' splits pieces when allowed.
    std::vector<std::string> value_pieces(bool allow_star) {
        std::vector<std::string> pieces(1);
        while (true) {
            if (at_end()) fail("')'");
            const char c = peek();
            if (c == ')') break;
            if (c == '(') fail("escaped '(' (\\28)");
            if (c == '*') {
                if (!allow_star) fail("escaped '*' (\\2a)");
                pieces.emplace_back();
                ++pos_;
                continue;
            }
            if (c == '\\') {
                const int hi = pos_ + 1 < text_.size() ? hex_digit(text_[pos_ + 1]) : -1;
                const int lo = pos_ + 2 < text_.size() ? hex_digit(text_[pos_ + 2]) : -1;
                if (hi < 0 || lo < 0) {
                    ++pos_;
                    fail("two hex digits after '\\'");
                }
                pieces.back().push_back(static_cast<char>(hi * 16 + lo));
                pos_ += 3;
                continue;
            }
            pieces.back().push_back(c);
            ++pos_;
        }
        return pieces;
    }

    Filter item() {
        const std::string name = attr();
        if (at_end()) fail("'=', '>=' or '<='");
        if (peek() == '>' || peek() == '<') {
            const bool ge = peek() == '>';
            ++pos_;
            expect('=');
            std::string value = std::move(value_pieces(false).front());
            return ge ? Filter::greater_or_equal(name, std::move(value))
                      : Filter::less_or_equal(name, std::move(value));
        }
        expect('=');
        const std::size_t value_start = pos_;
        auto pieces = value_pieces(true);
        if (pieces.size() == 1) return Filter::equality(name, std::move(pieces.front()));
        if (pieces.size() == 2 && pieces[0].empty() && pieces[1].empty()) return Filter::presence(name);

        std::optional<std::string> initial;
        std::optional<std::string> final;
        std::vector<std::string> any;
        if (!pieces.front().empty()) initial = pieces.front();
        if (!pieces.back().empty()) final = pieces.back();
        for (std::size_t i = 1; i + 1 < pieces.size(); ++i) {
            if (!pieces[i].empty()) any.push_back(std::move(pieces[i]));
        }
        if (!initial && !final && any.empty()) {
            pos_ = value_start;
            fail("a non-empty substring component");
        }
        return Filter::substring(name, std::move(initial), std::move(any), std::move(final));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void append_escaped(std::string& out, std::string_view value) {
    static constexpr char kHex[] = "0123456789abcdef";
    for (const char c : value) {
        if (c == '(' || c == ')' || c == '*' || c == '\\' || c == '\0') {
            const auto u = static_cast<unsigned char>(c);
            out.push_back('\\');
            out.push_back(kHex[u >> 4]);
            out.push_back(kHex[u & 0x0f]);
        } else {
            out.push_back(c);
        }
    }
}

void render_into(std::string& out, const Filter& f) {
    out.push_back('(');
    switch (f.kind) {
        case Filter::Kind::And:
        case Filter::Kind::Or:
            out.push_back(f.kind == Filter::Kind::And ? '&' : '|');
            for (const auto& child : f.children) render_into(out, child);
            break;
        case Filter::Kind::Not:
            out.push_back('!');
            render_into(out, f.children.front());
            break;
        case Filter::Kind::Equality:
            out += f.attr;
            out.push_back('=');
            append_escaped(out, f.value);
            break;
        case Filter::Kind::Presence:
            out += f.attr;
            out += "=*";
            break;
        case Filter::Kind::GreaterOrEqual:
        case Filter::Kind::LessOrEqual:
            out += f.attr;
            out += f.kind == Filter::Kind::GreaterOrEqual ? ">=" : "<=";
            append_escaped(out, f.value);
            break;
        case Filter::Kind::Substring:
            out += f.attr;
            out.push_back('=');
            if (f.initial) append_escaped(out, *f.initial);
            out.push_back('*');
            for (const auto& piece : f.any) {
                append_escaped(out, piece);
                out.push_back('*');
            }
            if (f.final) append_escaped(out, *f.final);
            break;
    }
    out.push_back(')');
}

bool values_satisfy(const Entry& entry, const std::string& attr, auto&& pred) {
    const auto* values = entry.find(attr);
    if (!values) return false;
    return std::any_of(values->begin(), values->end(), pred);
}

int ordering(std::string_view lhs, std::string_view rhs) {
    const auto a = util::parse_decimal(lhs);
    const auto b = util::parse_decimal(rhs);
    if (a && b) return *a < *b ? -1 : (*a > *b ? 1 : 0);
    return util::icompare(lhs, rhs);
}

bool substring_matches(std::string_view value, const Filter& f) {
    const std::string hay = util::to_lower(value);
    std::size_t pos = 0;
    std::size_t end = hay.size();
    if (f.initial) {
        const std::string p = util::to_lower(*f.initial);
        if (p.size() > hay.size() || hay.compare(0, p.size(), p) != 0) return false;
        pos = p.size();
    }
    if (f.final) {
        const std::string s = util::to_lower(*f.final);
        if (s.size() > end - pos) return false;
        if (hay.compare(end - s.size(), s.size(), s) != 0) return false;
        end -= s.size();
    }
    for (const auto& piece : f.any) {
        const std::string p = util::to_lower(piece);
        const std::size_t found = hay.find(p, pos);
        if (found == std::string::npos || found + p.size() > end) return false;
        pos = found + p.size();
    }
    return true;
}

}  // namespace

Filter Filter::all_of(std::vector<Filter> children) { return composite(Kind::And, std::move(children)); }
Filter Filter::any_of(std::vector<Filter> children) { return composite(Kind::Or, std::move(children)); }

Filter Filter::negate(Filter child) {
    std::vector<Filter> children;
    children.push_back(std::move(child));
    return composite(Kind::Not, std::move(children));
}

Filter Filter::equality(std::string_view attr, std::string value) {
    return leaf(Kind::Equality, attr, std::move(value));
}

Filter Filter::presence(std::string_view attr) { return leaf(Kind::Presence, attr, {}); }

Filter Filter::greater_or_equal(std::string_view attr, std::string value) {
    return leaf(Kind::GreaterOrEqual, attr, std::move(value));
}

Filter Filter::less_or_equal(std::string_view attr, std::string value) {
    return leaf(Kind::LessOrEqual, attr, std::move(value));
}

Filter Filter::substring(std::string_view attr, std::optional<std::string> initial,
                         std::vector<std::string> any, std::optional<std::string> final) {
    if ((initial && initial->empty()) || (final && final->empty()) ||
        std::any_of(any.begin(), any.end(), [](const std::string& s) { return s.empty(); })) {
        throw std::invalid_argument("substring components must be non-empty");
    }
    if (!initial && !final && any.empty()) {
        throw std::invalid_argument("substring filter needs at least one component");
    }
    Filter f = leaf(Kind::Substring, attr, {});
    f.initial = std::move(initial);
    f.any = std::move(any);
    f.final = std::move(final);
    return f;
}

Filter parse_filter(std::string_view text) { return Parser(text).parse(); }

std::string render_filter(const Filter& filter) {
    std::string out;
    render_into(out, filter);
    return out;
}

bool match_entry(const Entry& entry, const Filter& f) {
    switch (f.kind) {
        case Filter::Kind::And:
            return std::all_of(f.children.begin(), f.children.end(),
                               [&](const Filter& c) { return match_entry(entry, c); });
        case Filter::Kind::Or:
            return std::any_of(f.children.begin(), f.children.end(),
                               [&](const Filter& c) { return match_entry(entry, c); });
        case Filter::Kind::Not:
            return !match_entry(entry, f.children.front());
        case Filter::Kind::Presence: {
            const auto* values = entry.find(f.attr);
            return values && !values->empty();
        }
        case Filter::Kind::Equality:
            return values_satisfy(entry, f.attr, [&](const std::string& v) { return util::iequals(v, f.value); });
        case Filter::Kind::GreaterOrEqual:
            return values_satisfy(entry, f.attr, [&](const std::string& v) { return ordering(v, f.value) >= 0; });
        case Filter::Kind::LessOrEqual:
            return values_satisfy(entry, f.attr, [&](const std::string& v) { return ordering(v, f.value) <= 0; });
        case Filter::Kind::Substring:
            return values_satisfy(entry, f.attr, [&](const std::string& v) { return substring_matches(v, f); });
    }
    return false;
}

}  // namespace meshscape::protocol
