#pragma once

#include <chrono>
#include <vector>

#include "meshscape/protocol/frame.hpp"
#include "meshscape/protocol/message.hpp"
#include "meshscape/protocol/net.hpp"

namespace meshscape::protocol {

// One framed connection to a directory server. Not thread-safe.
class Connection {
public:
    static Connection open(const Endpoint& endpoint, Deadline deadline);

    void send(const Message& message, Deadline deadline);
    // Throws Unreachable if the peer closes before a full frame arrives.
    Message receive(Deadline deadline);

private:
    explicit Connection(Socket socket) : socket_(std::move(socket)) {}

    Socket socket_;
    FrameReader reader_;
};

// Directory client: connect, search, collect entries until SearchDone.
//
// Throws Unreachable, Timeout, RemoteError (non-zero SearchDone code) or
// ProtocolViolation. Entries come back in arrival order.
std::vector<Entry> client_search(const Endpoint& endpoint, const SearchRequest& request,
                                 std::chrono::milliseconds timeout);

// Same, but also returns the SearchDone diagnostic.
struct SearchReply {
    std::vector<Entry> entries;
    std::string diagnostic;
};
SearchReply client_search_reply(const Endpoint& endpoint, const SearchRequest& request,
                                std::chrono::milliseconds timeout);

bool client_register(const Endpoint& endpoint, const Register& registration, std::chrono::milliseconds timeout);

std::uint64_t client_ping(const Endpoint& endpoint, std::uint64_t nonce, std::chrono::milliseconds timeout);

}  // namespace meshscape::protocol
