#include "meshscape/protocol/client.hpp"

#include <array>

namespace meshscape::protocol {

Connection Connection::open(const Endpoint& endpoint, Deadline deadline) {
    return Connection(connect_tcp(endpoint, deadline));
}

void Connection::send(const Message& message, Deadline deadline) {
    const auto frame = encode_frame(message);
    send_all(socket_, frame, deadline);
}

Message Connection::receive(Deadline deadline) {
    std::array<std::uint8_t, 16 * 1024> buf{};
    while (true) {
        if (auto m = reader_.next()) return std::move(*m);
        const std::size_t n = recv_some(socket_, buf, deadline);
        if (n == 0) throw Unreachable("connection closed by peer");
        reader_.feed(std::span<const std::uint8_t>(buf.data(), n));
    }
}

SearchReply client_search_reply(const Endpoint& endpoint, const SearchRequest& request,
                                std::chrono::milliseconds timeout) {
    if (timeout.count() <= 0) throw std::invalid_argument("search timeout must be positive");
    const Deadline deadline = SteadyClock::now() + timeout;
    auto conn = Connection::open(endpoint, deadline);
    conn.send(request, deadline);

    SearchReply reply;
    while (true) {
        Message m = conn.receive(deadline);
        if (auto* entry = std::get_if<SearchEntry>(&m)) {
            if (entry->msg_id != request.msg_id) throw ProtocolViolation("entry for unexpected msg_id");
            reply.entries.push_back(std::move(entry->entry));
        } else if (auto* done = std::get_if<SearchDone>(&m)) {
            if (done->msg_id != request.msg_id) throw ProtocolViolation("done for unexpected msg_id");
            if (done->code != result_code::kSuccess) throw RemoteError(done->code, done->diagnostic);
            reply.diagnostic = std::move(done->diagnostic);
            return reply;
        } else if (auto* err = std::get_if<ProtocolError>(&m)) {
            throw RemoteError(result_code::kProtocolError, err->text);
        } else {
            throw ProtocolViolation("unexpected message in search response");
        }
    }
}

std::vector<Entry> client_search(const Endpoint& endpoint, const SearchRequest& request,
                                 std::chrono::milliseconds timeout) {
    return client_search_reply(endpoint, request, timeout).entries;
}

bool client_register(const Endpoint& endpoint, const Register& registration, std::chrono::milliseconds timeout) {
    const Deadline deadline = SteadyClock::now() + timeout;
    auto conn = Connection::open(endpoint, deadline);
    conn.send(registration, deadline);
    Message m = conn.receive(deadline);
    if (auto* ack = std::get_if<RegisterAck>(&m)) return ack->accepted;
    if (auto* err = std::get_if<ProtocolError>(&m)) throw RemoteError(result_code::kProtocolError, err->text);
    throw ProtocolViolation("unexpected reply to register");
}

std::uint64_t client_ping(const Endpoint& endpoint, std::uint64_t nonce, std::chrono::milliseconds timeout) {
    const Deadline deadline = SteadyClock::now() + timeout;
    auto conn = Connection::open(endpoint, deadline);
    conn.send(Ping{nonce}, deadline);
    Message m = conn.receive(deadline);
    if (auto* pong = std::get_if<Pong>(&m)) return pong->nonce;
    throw ProtocolViolation("unexpected reply to ping");
}

}  // namespace meshscape::protocol
