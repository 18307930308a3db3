#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

// Canonical structured-text documents (config and profile files): JSON with
// lexicographically sorted keys, two-space indentation, trailing newline.

namespace meshscape::util {

class DocumentParseError : public std::runtime_error {
public:
    DocumentParseError(std::size_t line, std::string message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line), message_(std::move(message)) {}

    std::size_t line() const { return line_; }
    const std::string& message() const { return message_; }

private:
    std::size_t line_;
    std::string message_;
};

inline std::string dump_document(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

inline nlohmann::json parse_document(std::string_view text) {
    try {
        return nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
        std::string msg = e.what();
        if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
        throw DocumentParseError(line, msg);
    }
}

}  // namespace meshscape::util
