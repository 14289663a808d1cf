#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <vector>

#include "crlsc/fusion.hpp"
#include "crlsc/net_server.hpp"
#include "crlsc/wire.hpp"

namespace crlsc {

inline constexpr std::uint16_t kDefaultKbPort = 7431;

struct NetAddress {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultKbPort;
};

inline NetAddress parse_address(const std::string& addr) {
    NetAddress out;
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
        if (!addr.empty()) out.host = addr;
        return out;
    }
    out.host = addr.substr(0, colon);
    if (out.host.empty()) out.host = "127.0.0.1";
    const std::string port_str = addr.substr(colon + 1);
    const long port = std::strtol(port_str.c_str(), nullptr, 10);
    if (port < 1 || port > 65535) throw ValidationError("bad port in address: " + addr);
    out.port = static_cast<std::uint16_t>(port);
    return out;
}

namespace netdetail {

// Blocking socket with connect/read/write timeouts, one request per call.
class Connection {
public:
    Connection(const NetAddress& addr, int timeout_ms) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw NetError("client: socket() failed");

        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(addr.port);
        if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
            ::close(fd_);
            throw NetError("client: bad address " + addr.host);
        }

        const int flags = ::fcntl(fd_, F_GETFL, 0);
        ::fcntl(fd_, F_SETFL, flags | O_NONBLOCK);
        const int rc = ::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
        if (rc < 0) {
            if (errno != EINPROGRESS) {
                ::close(fd_);
                throw NetError(errno == ECONNREFUSED ? "client: connection refused"
                                                     : "client: connect failed");
            }
            pollfd pfd{fd_, POLLOUT, 0};
            const int pr = ::poll(&pfd, 1, timeout_ms);
            if (pr == 0) {
                ::close(fd_);
                throw NetError("client: connect timeout");
            }
            int err = 0;
            socklen_t elen = sizeof(err);
            ::getsockopt(fd_, SOL_SOCKET, SO_ERROR, &err, &elen);
            if (pr < 0 || err != 0) {
                ::close(fd_);
                throw NetError(err == ECONNREFUSED ? "client: connection refused"
                                                   : "client: connect failed");
            }
        }
        ::fcntl(fd_, F_SETFL, flags);

        timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    }

    ~Connection() {
        if (fd_ >= 0) ::close(fd_);
    }

    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    void send_frame(wire::MsgType type, const std::vector<std::uint8_t>& payload) {
        if (!write_all(fd_, wire::encode_frame(type, payload).data(),
                       payload.size() + 5))
            throw NetError(errno == EAGAIN || errno == EWOULDBLOCK
                               ? "client: send timeout"
                               : "client: send failed");
    }

    wire::Frame read_frame() {
        std::uint8_t lenbuf[4];
        if (!read_exact(fd_, lenbuf, 4)) throw recv_error();
        std::uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(lenbuf[i]) << (8 * i);
        if (len < 1 || len > wire::kMaxFrameLen)
            throw NetError("client: oversized frame from server");
        std::vector<std::uint8_t> body(len);
        if (!read_exact(fd_, body.data(), len)) throw recv_error();
        wire::Frame frame;
        frame.type = static_cast<wire::MsgType>(body[0]);
        frame.payload.assign(body.begin() + 1, body.end());
        return frame;
    }

private:
    static NetError recv_error() {
        return NetError(errno == EAGAIN || errno == EWOULDBLOCK
                            ? "client: receive timeout"
                            : "client: connection closed");
    }

    int fd_ = -1;
};

inline void throw_if_error(const wire::Frame& frame) {
    if (frame.type == wire::MsgType::Error) {
        const auto err = wire::decode_error_response(binio::Reader(frame.payload));
        if (err.code == wire::kErrVersionMismatch)
            throw NetError("client: protocol-version mismatch: " + err.message);
        throw NetError("client: server error " + std::to_string(err.code) + ": " +
                       err.message);
    }
}

inline void handshake(Connection& conn) {
    conn.send_frame(wire::MsgType::Hello, wire::encode(wire::Hello{}));
    const wire::Frame reply = conn.read_frame();
    throw_if_error(reply);
    if (reply.type != wire::MsgType::Hello)
        throw NetError("client: unexpected handshake reply");
    const wire::Hello hello = wire::decode_hello(binio::Reader(reply.payload));
    if (hello.version != wire::kProtocolVersion)
        throw NetError("client: protocol-version mismatch");
}

}  // namespace netdetail

// One connect + handshake + request/response per call; retries are the
// caller's concern.
inline std::vector<SearchHit> client_query(const std::string& address,
                                           const std::vector<double>& q, std::size_t n,
                                           int timeout_ms = 5000) {
    netdetail::Connection conn(parse_address(address), timeout_ms);
    netdetail::handshake(conn);

    wire::QueryRequest req;
    req.n = static_cast<std::uint32_t>(n);
    req.q.assign(q.begin(), q.end());
    conn.send_frame(wire::MsgType::QueryRequest, wire::encode(req));

    const wire::Frame reply = conn.read_frame();
    netdetail::throw_if_error(reply);
    if (reply.type != wire::MsgType::QueryResponse)
        throw NetError("client: unexpected reply type");
    const auto resp = wire::decode_query_response(binio::Reader(reply.payload));

    std::vector<SearchHit> hits;
    hits.reserve(resp.items.size());
    for (const wire::QueryItem& it : resp.items)
        hits.push_back({it.id, static_cast<double>(it.dist), it.vec});
    return hits;
}

inline wire::InfoResponse client_info(const std::string& address, int timeout_ms = 5000) {
    netdetail::Connection conn(parse_address(address), timeout_ms);
    netdetail::handshake(conn);
    conn.send_frame(wire::MsgType::InfoRequest, wire::encode(wire::InfoRequest{}));
    const wire::Frame reply = conn.read_frame();
    netdetail::throw_if_error(reply);
    if (reply.type != wire::MsgType::InfoResponse)
        throw NetError("client: unexpected reply type");
    return wire::decode_info_response(binio::Reader(reply.payload));
}

inline QueryFn remote_query_fn(const std::string& address, int timeout_ms = 5000) {
    return [address, timeout_ms](const std::vector<double>& q, std::size_t n) {
        return client_query(address, q, n, timeout_ms);
    };
}

// Same numerical result as the local retrieve_and_fuse on the served KB:
// identical decoded f32 vectors travel the wire and the math is identical.
inline FusionResult remote_retrieve_and_fuse(const std::string& address, const Matrix& q,
                                             std::size_t n, const NoiseConfig& noise,
                                             FusionMode mode, int timeout_ms = 5000,
                                             bool score_with_perturbed = false) {
    QueryFn fn = remote_query_fn(address, timeout_ms);
    return retrieve_and_fuse(q, fn, n, noise, mode, score_with_perturbed);
}

}  // namespace crlsc
