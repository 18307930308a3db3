#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "meshscape/protocol/message.hpp"

/*
    frame layout:
    - [4 bytes: body length N, big-endian][N bytes: body]
    - body: compact JSON object with sorted keys and an "op" field
    - N <= 1 MiB in both directions
*/

namespace meshscape::protocol {

inline constexpr std::size_t kMaxFrameBody = 1u << 20;
inline constexpr std::size_t kFrameHeaderSize = 4;

class OversizeMessage : public std::length_error {
public:
    using std::length_error::length_error;
};

// Malformed body or bad declared length. The connection should be dropped.
class ProtocolViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string encode_body(const Message& message);
Message decode_body(std::string_view body);

std::vector<std::uint8_t> encode_frame(const Message& message);

struct DecodeResult {
    std::vector<Message> messages;
    std::size_t consumed = 0;
};

// Decodes every complete frame at the front of `buffer`; a partial trailing
// frame is left unconsumed.
DecodeResult decode_frames(std::span<const std::uint8_t> buffer);

// Buffers a byte stream and yields messages as frames complete.
class FrameReader {
public:
    void feed(std::span<const std::uint8_t> bytes);
    std::optional<Message> next();
    std::size_t buffered() const { return buffer_.size() - start_; }

private:
    std::vector<std::uint8_t> buffer_;
    std::size_t start_ = 0;
};

}  // namespace meshscape::protocol
