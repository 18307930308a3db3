#include "meshscape/protocol/dn.hpp"

#include "meshscape/util/strings.hpp"

namespace meshscape::protocol {

namespace {

std::string escape_value(std::string_view v) {
    std::string out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const char c = v[i];
        if (c == ',' || c == '=' || c == '\\' || (i == 0 && c == ' ')) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

Rdn parse_rdn(std::string_view text, std::size_t offset) {
    // name up to the first unescaped '='
    const std::size_t eq = text.find('=');
    if (eq == std::string_view::npos) {
        throw DnError("rdn at offset " + std::to_string(offset) + " has no '='");
    }
    const std::string_view name = text.substr(0, eq);
    if (!util::is_attr_name(name)) {
        throw DnError("bad attribute name '" + std::string(name) + "' in dn");
    }
    std::string value;
    for (std::size_t i = eq + 1; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\\') {
            if (i + 1 >= text.size()) throw DnError("dangling escape in dn");
            c = text[++i];
        } else if (c == '=') {
            throw DnError("unescaped '=' in dn value");
        }
        value.push_back(c);
    }
    return Rdn{util::to_lower(name), std::move(value)};
}

}  // namespace

Dn::Dn(std::vector<Rdn> rdns) : rdns_(std::move(rdns)) {
    for (auto& rdn : rdns_) {
        if (!util::is_attr_name(rdn.name)) throw DnError("bad attribute name '" + rdn.name + "' in dn");
        rdn.name = util::to_lower(rdn.name);
    }
}

Dn Dn::parse(std::string_view text) {
    std::vector<Rdn> rdns;
    if (text.empty()) return Dn{};
    std::size_t start = 0;
    std::size_t i = 0;
    auto flush = [&](std::size_t end) {
        std::string_view piece = text.substr(start, end - start);
        std::size_t lead = 0;
        while (lead < piece.size() && piece[lead] == ' ') ++lead;
        piece.remove_prefix(lead);
        rdns.push_back(parse_rdn(piece, start + lead));
    };
    while (i < text.size()) {
        if (text[i] == '\\') {
            i += 2;
            continue;
        }
        if (text[i] == ',') {
            flush(i);
            start = i + 1;
        }
        ++i;
    }
    if (i > text.size()) throw DnError("dangling escape in dn");
    flush(text.size());
    return Dn(std::move(rdns));
}

std::string Dn::str() const {
    std::string out;
    for (std::size_t i = 0; i < rdns_.size(); ++i) {
        if (i) out += ", ";
        out += rdns_[i].name;
        out += '=';
        out += escape_value(rdns_[i].value);
    }
    return out;
}

Dn Dn::child(std::string_view name, std::string_view value) const {
    std::vector<Rdn> rdns;
    rdns.reserve(rdns_.size() + 1);
    rdns.push_back(Rdn{std::string(name), std::string(value)});
    rdns.insert(rdns.end(), rdns_.begin(), rdns_.end());
    return Dn(std::move(rdns));
}

Dn Dn::parent() const {
    if (rdns_.empty()) return Dn{};
    return Dn(std::vector<Rdn>(rdns_.begin() + 1, rdns_.end()));
}

bool Dn::same_as(const Dn& other) const {
    if (rdns_.size() != other.rdns_.size()) return false;
    for (std::size_t i = 0; i < rdns_.size(); ++i) {
        if (rdns_[i].name != other.rdns_[i].name) return false;
        if (!util::iequals(rdns_[i].value, other.rdns_[i].value)) return false;
    }
    return true;
}

bool Dn::is_descendant_of(const Dn& ancestor) const {
    if (rdns_.size() <= ancestor.rdns_.size()) return false;
    const std::size_t skip = rdns_.size() - ancestor.rdns_.size();
    for (std::size_t i = 0; i < ancestor.rdns_.size(); ++i) {
        const Rdn& mine = rdns_[skip + i];
        const Rdn& theirs = ancestor.rdns_[i];
        if (mine.name != theirs.name || !util::iequals(mine.value, theirs.value)) return false;
    }
    return true;
}

}  // namespace meshscape::protocol
