#include "meshscape/protocol/frame.hpp"

#include <algorithm>
#include <initializer_list>

#include <json.hpp>

#include "meshscape/util/strings.hpp"

namespace meshscape::protocol {

using nlohmann::json;

namespace {

void write_uint32_be(std::vector<std::uint8_t>& buf, std::uint32_t value) {
    buf.push_back(static_cast<std::uint8_t>((value >> 24) & 0xFF));
    buf.push_back(static_cast<std::uint8_t>((value >> 16) & 0xFF));
    buf.push_back(static_cast<std::uint8_t>((value >> 8) & 0xFF));
    buf.push_back(static_cast<std::uint8_t>(value & 0xFF));
}

std::uint32_t read_uint32_be(const std::uint8_t* data) {
    return (static_cast<std::uint32_t>(data[0]) << 24) | (static_cast<std::uint32_t>(data[1]) << 16) |
           (static_cast<std::uint32_t>(data[2]) << 8) | static_cast<std::uint32_t>(data[3]);
}

json attributes_to_json(const AttributeMap& attrs) {
    json out = json::object();
    for (const auto& [key, values] : attrs) out[key] = values;
    return out;
}

json to_json(const Message& message) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SearchRequest>) {
                return {{"op", "search"},
                        {"msg_id", m.msg_id},
                        {"base", m.base.str()},
                        {"scope", to_string(m.scope)},
                        {"filter", render_filter(m.filter)},
                        {"attrs", m.attrs}};
            } else if constexpr (std::is_same_v<T, SearchEntry>) {
                return {{"op", "entry"},
                        {"msg_id", m.msg_id},
                        {"dn", m.entry.dn.str()},
                        {"attributes", attributes_to_json(m.entry.attributes)}};
            } else if constexpr (std::is_same_v<T, SearchDone>) {
                return {{"op", "done"}, {"msg_id", m.msg_id}, {"code", m.code}, {"diagnostic", m.diagnostic}};
            } else if constexpr (std::is_same_v<T, Register>) {
                return {{"op", "register"},
                        {"dn", m.dn.str()},
                        {"address", m.address},
                        {"port", m.port},
                        {"ttl_seconds", m.ttl_seconds}};
            } else if constexpr (std::is_same_v<T, RegisterAck>) {
                return {{"op", "register_ack"}, {"accepted", m.accepted}};
            } else if constexpr (std::is_same_v<T, Ping>) {
                return {{"op", "ping"}, {"nonce", m.nonce}};
            } else if constexpr (std::is_same_v<T, Pong>) {
                return {{"op", "pong"}, {"nonce", m.nonce}};
            } else {
                return {{"op", "error"}, {"text", m.text}};
            }
        },
        message);
}

[[noreturn]] void violation(const std::string& what) { throw ProtocolViolation("malformed message: " + what); }

class Fields {
public:
    Fields(const json& obj, std::initializer_list<const char*> expected) : obj_(obj) {
        if (obj.size() != expected.size()) violation("unexpected field set");
        for (const char* key : expected) {
            if (!obj.contains(key)) violation(std::string("missing field '") + key + "'");
        }
    }

    std::string str(const char* key) const {
        const auto& v = obj_.at(key);
        if (!v.is_string()) violation(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }

    std::uint64_t u64(const char* key) const {
        const auto& v = obj_.at(key);
        if (!v.is_number_unsigned()) violation(std::string("field '") + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::int64_t i64(const char* key) const {
        const auto& v = obj_.at(key);
        if (!v.is_number_integer()) violation(std::string("field '") + key + "' must be an integer");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
            violation(std::string("field '") + key + "' out of range");
        }
        return v.get<std::int64_t>();
    }

    std::uint64_t msg_id() const {
        const std::uint64_t id = u64("msg_id");
        if (id == 0) violation("msg_id must be positive");
        return id;
    }

    bool boolean(const char* key) const {
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) violation(std::string("field '") + key + "' must be a boolean");
        return v.get<bool>();
    }

    std::vector<std::string> strings(const json& v, const std::string& what) const {
        if (!v.is_array()) violation(what + " must be a list");
        std::vector<std::string> out;
        for (const auto& item : v) {
            if (!item.is_string()) violation(what + " must contain strings");
            out.push_back(item.get<std::string>());
        }
        return out;
    }

    const json& raw(const char* key) const { return obj_.at(key); }

private:
    const json& obj_;
};

Dn dn_field(const Fields& f, const char* key) {
    try {
        return Dn::parse(f.str(key));
    } catch (const DnError& e) {
        violation(e.what());
    }
}

Message from_json(const json& obj) {
    if (!obj.is_object()) violation("body is not an object");
    auto op_it = obj.find("op");
    if (op_it == obj.end() || !op_it->is_string()) violation("missing op");
    const std::string op = op_it->get<std::string>();

    if (op == "search") {
        Fields f(obj, {"op", "msg_id", "base", "scope", "filter", "attrs"});
        SearchRequest req;
        req.msg_id = f.msg_id();
        req.base = dn_field(f, "base");
        try {
            req.scope = scope_from_string(f.str("scope"));
            req.filter = parse_filter(f.str("filter"));
        } catch (const std::exception& e) {
            violation(e.what());
        }
        req.attrs = f.strings(f.raw("attrs"), "attrs");
        for (const auto& a : req.attrs) {
            if (!util::is_attr_name(a)) violation("bad attribute name '" + a + "'");
        }
        return req;
    }
    if (op == "entry") {
        Fields f(obj, {"op", "msg_id", "dn", "attributes"});
        SearchEntry m;
        m.msg_id = f.msg_id();
        m.entry.dn = dn_field(f, "dn");
        const json& attrs = f.raw("attributes");
        if (!attrs.is_object()) violation("attributes must be an object");
        for (const auto& [key, values] : attrs.items()) {
            if (!util::is_attr_name(key) || key != util::to_lower(key)) violation("bad attribute name '" + key + "'");
            m.entry.attributes[key] = f.strings(values, "attribute '" + key + "'");
        }
        return m;
    }
    if (op == "done") {
        Fields f(obj, {"op", "msg_id", "code", "diagnostic"});
        const std::int64_t code = f.i64("code");
        if (code < INT32_MIN || code > INT32_MAX) violation("code out of range");
        return SearchDone{f.msg_id(), static_cast<int>(code), f.str("diagnostic")};
    }
    if (op == "register") {
        Fields f(obj, {"op", "dn", "address", "port", "ttl_seconds"});
        const std::int64_t port = f.i64("port");
        if (port < INT32_MIN || port > INT32_MAX) violation("port out of range");
        return Register{dn_field(f, "dn"), f.str("address"), static_cast<int>(port), f.i64("ttl_seconds")};
    }
    if (op == "register_ack") {
        Fields f(obj, {"op", "accepted"});
        return RegisterAck{f.boolean("accepted")};
    }
    if (op == "ping") {
        Fields f(obj, {"op", "nonce"});
        return Ping{f.u64("nonce")};
    }
    if (op == "pong") {
        Fields f(obj, {"op", "nonce"});
        return Pong{f.u64("nonce")};
    }
    if (op == "error") {
        Fields f(obj, {"op", "text"});
        return ProtocolError{f.str("text")};
    }
    violation("unknown op '" + op + "'");
}

}  // namespace

std::string_view to_string(Scope scope) {
    switch (scope) {
        case Scope::Base: return "base";
        case Scope::One: return "one";
        case Scope::Sub: return "sub";
    }
    return "sub";
}

Scope scope_from_string(std::string_view text) {
    if (text == "base") return Scope::Base;
    if (text == "one") return Scope::One;
    if (text == "sub") return Scope::Sub;
    throw std::invalid_argument("unknown scope '" + std::string(text) + "'");
}

std::string encode_body(const Message& message) {
    try {
        return to_json(message).dump();
    } catch (const json::type_error& e) {
        throw std::invalid_argument(std::string("message is not valid UTF-8 text: ") + e.what());
    }
}

Message decode_body(std::string_view body) {
    json obj;
    try {
        obj = json::parse(body.begin(), body.end());
    } catch (const json::exception& e) {
        violation(e.what());
    }
    return from_json(obj);
}

std::vector<std::uint8_t> encode_frame(const Message& message) {
    const std::string body = encode_body(message);
    if (body.size() > kMaxFrameBody) {
        throw OversizeMessage("message body of " + std::to_string(body.size()) + " bytes exceeds " +
                              std::to_string(kMaxFrameBody));
    }
    std::vector<std::uint8_t> frame;
    frame.reserve(kFrameHeaderSize + body.size());
    write_uint32_be(frame, static_cast<std::uint32_t>(body.size()));
    frame.insert(frame.end(), body.begin(), body.end());
    return frame;
}

DecodeResult decode_frames(std::span<const std::uint8_t> buffer) {
    DecodeResult result;
    std::size_t pos = 0;
    while (buffer.size() - pos >= kFrameHeaderSize) {
        const std::uint32_t length = read_uint32_be(buffer.data() + pos);
        if (length > kMaxFrameBody) {
            throw ProtocolViolation("declared frame length " + std::to_string(length) + " exceeds limit");
        }
        if (buffer.size() - pos - kFrameHeaderSize < length) break;
        const auto* body = reinterpret_cast<const char*>(buffer.data() + pos + kFrameHeaderSize);
        result.messages.push_back(decode_body(std::string_view(body, length)));
        pos += kFrameHeaderSize + length;
    }
    result.consumed = pos;
    return result;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
    if (start_ > 0 && start_ == buffer_.size()) {
        buffer_.clear();
        start_ = 0;
    }
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
    const std::size_t available = buffer_.size() - start_;
    if (available < kFrameHeaderSize) return std::nullopt;
    const std::uint32_t length = read_uint32_be(buffer_.data() + start_);
    if (length > kMaxFrameBody) {
        throw ProtocolViolation("declared frame length " + std::to_string(length) + " exceeds limit");
    }
    if (available - kFrameHeaderSize < length) return std::nullopt;
    const auto* body = reinterpret_cast<const char*>(buffer_.data() + start_ + kFrameHeaderSize);
    Message m = decode_body(std::string_view(body, length));
    start_ += kFrameHeaderSize + length;
    if (start_ > (1u << 16) && start_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
        start_ = 0;
    }
    return m;
}

}  // namespace meshscape::protocol
