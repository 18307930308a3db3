#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meshscape/protocol/dn.hpp"
#include "meshscape/protocol/entry.hpp"
#include "meshscape/protocol/filter.hpp"

namespace meshscape::protocol {

enum class Scope { Base, One, Sub };

std::string_view to_string(Scope scope);
Scope scope_from_string(std::string_view text);  // throws std::invalid_argument

namespace result_code {
inline constexpr int kSuccess = 0;
inline constexpr int kProtocolError = 2;
inline constexpr int kNoSuchObject = 32;
}  // namespace result_code

struct SearchRequest {
    std::uint64_t msg_id = 1;
    Dn base;  // empty = the server's root entry
    Scope scope = Scope::Sub;
    Filter filter = Filter::presence("objectclass");
    std::vector<std::string> attrs;  // empty = all

    bool operator==(const SearchRequest&) const = default;
};

struct SearchEntry {
    std::uint64_t msg_id = 0;
    Entry entry;

    bool operator==(const SearchEntry&) const = default;
};

struct SearchDone {
    std::uint64_t msg_id = 0;
    int code = result_code::kSuccess;
    std::string diagnostic;

    bool operator==(const SearchDone&) const = default;
};

struct Register {
    Dn dn;
    std::string address;
    int port = 0;
    std::int64_t ttl_seconds = 0;

    bool operator==(const Register&) const = default;
};

struct RegisterAck {
    bool accepted = false;

    bool operator==(const RegisterAck&) const = default;
};

struct Ping {
    std::uint64_t nonce = 0;

    bool operator==(const Ping&) const = default;
};

struct Pong {
    std::uint64_t nonce = 0;

    bool operator==(const Pong&) const = default;
};

struct ProtocolError {
    std::string text;

    bool operator==(const ProtocolError&) const = default;
};

using Message =
    std::variant<SearchRequest, SearchEntry, SearchDone, Register, RegisterAck, Ping, Pong, ProtocolError>;

}  // namespace meshscape::protocol
