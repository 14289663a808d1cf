#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "crlsc/knowledge_base.hpp"
#include "crlsc/wire.hpp"

namespace crlsc {

namespace netdetail {

inline bool read_exact(int fd, void* buf, std::size_t len) {
    auto* p = static_cast<std::uint8_t*>(buf);
    std::size_t got = 0;
    while (got < len) {
        const ssize_t r = ::recv(fd, p + got, len - got, 0);
        if (r <= 0) return false;
        got += static_cast<std::size_t>(r);
    }
    return true;
}

inline bool write_all(int fd, const void* buf, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(buf);
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t r = ::send(fd, p + sent, len - sent, MSG_NOSIGNAL);
        if (r <= 0) return false;
        sent += static_cast<std::size_t>(r);
    }
    return true;
}

inline bool send_frame(int fd, wire::MsgType type, const std::vector<std::uint8_t>& payload) {
    const auto frame = wire::encode_frame(type, payload);
    return write_all(fd, frame.data(), frame.size());
}

}  // namespace netdetail

// Serves an immutable KnowledgeBase over the binary protocol. One thread per
// connection, one in-flight request per connection. The KB is shared
// read-only state and needs no locking.
class KbServer {
public:
    KbServer(const KnowledgeBase& kb, const std::string& host = "127.0.0.1",
             std::uint16_t port = 0)
        : kb_(kb) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw NetError("serve_kb: socket() failed");
        int opt = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof(opt));

        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            throw NetError("serve_kb: bad bind address " + host);
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
            ::close(listen_fd_);
            throw NetError("serve_kb: bind failed on " + host + ":" + std::to_string(port));
        }
        if (::listen(listen_fd_, 64) < 0) {
            ::close(listen_fd_);
            throw NetError("serve_kb: listen failed");
        }
        sockaddr_in bound{};
        socklen_t blen = sizeof(bound);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
        port_ = ntohs(bound.sin_port);
        host_ = host;

        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    ~KbServer() { stop(); }

    KbServer(const KbServer&) = delete;
    KbServer& operator=(const KbServer&) = delete;

    std::uint16_t port() const { return port_; }
    std::string address() const { return host_ + ":" + std::to_string(port_); }

    void stop() {
        bool expected = true;
        if (!running_.compare_exchange_strong(expected, false)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (accept_thread_.joinable()) accept_thread_.join();
        {
            std::lock_guard<std::mutex> lock(conn_mutex_);
            for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        for (std::thread& t : conn_threads_)
            if (t.joinable()) t.join();
        conn_threads_.clear();
    }

private:
    void accept_loop() {
        while (running_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (!running_) break;
                continue;
            }
            std::lock_guard<std::mutex> lock(conn_mutex_);
            conn_fds_.push_back(fd);
            conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
        }
    }

    void send_error(int fd, std::uint16_t code, const std::string& msg) {
        wire::ErrorResponse err{code, msg};
        netdetail::send_frame(fd, wire::MsgType::Error, wire::encode(err));
    }

    void serve_connection(int fd) {
        while (running_) {
            std::uint8_t lenbuf[4];
            if (!netdetail::read_exact(fd, lenbuf, 4)) break;
            std::uint32_t len = 0;
            for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(lenbuf[i]) << (8 * i);
            if (len < 1 || len > wire::kMaxFrameLen) {
                send_error(fd, wire::kErrOversizedFrame, "frame length out of range");
                break;
            }
            std::vector<std::uint8_t> body(len);
            if (!netdetail::read_exact(fd, body.data(), len)) break;

            const auto type = static_cast<wire::MsgType>(body[0]);
            binio::Reader payload(body.data() + 1, body.size() - 1);
            try {
                if (!handle_message(fd, type, payload)) break;
            } catch (const ParseError& e) {
                send_error(fd, wire::kErrMalformed, e.what());
                break;
            } catch (const std::exception& e) {
                send_error(fd, wire::kErrQuery, e.what());
            }
        }
        ::close(fd);
    }

    // Returns false when the connection should close.
    bool handle_message(int fd, wire::MsgType type, binio::Reader payload) {
        switch (type) {
            case wire::MsgType::Hello: {
                const wire::Hello hello = wire::decode_hello(payload);
                if (hello.version != wire::kProtocolVersion) {
                    send_error(fd, wire::kErrVersionMismatch, "unsupported protocol version");
                    return false;
                }
                return netdetail::send_frame(fd, wire::MsgType::Hello,
                                             wire::encode(wire::Hello{}));
            }
            case wire::MsgType::QueryRequest: {
                const wire::QueryRequest req = wire::decode_query_request(payload);
                if (req.q.size() != kb_.codebook.config.d) {
                    send_error(fd, wire::kErrDimensionMismatch,
                               "query dimension does not match served KB");
                    return true;
                }
                if (req.n < 1) {
                    send_error(fd, wire::kErrQuery, "n must be >= 1");
                    return true;
                }
                std::vector<double> q(req.q.begin(), req.q.end());
                const auto hits = adc_search(q, kb_, req.n);
                return netdetail::send_frame(fd, wire::MsgType::QueryResponse,
                                             wire::encode(wire::to_query_response(hits)));
            }
            case wire::MsgType::InfoRequest: {
                if (!payload.exhausted()) throw ParseError("info request: trailing bytes");
                wire::InfoResponse info;
                info.d = static_cast<std::uint32_t>(kb_.codebook.config.d);
                info.m = static_cast<std::uint32_t>(kb_.codebook.config.m);
                info.k_star = static_cast<std::uint32_t>(kb_.codebook.config.k_star);
                info.n_entries = kb_.size();
                info.source_tag = kb_.source_tag;
                return netdetail::send_frame(fd, wire::MsgType::InfoResponse,
                                             wire::encode(info));
            }
            default:
                send_error(fd, wire::kErrUnknownType, "unknown message type");
                return true;  // connection survives unknown types
        }
    }

    const KnowledgeBase& kb_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::string host_;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex conn_mutex_;
    std::vector<int> conn_fds_;
    std::vector<std::thread> conn_threads_;
};

}  // namespace crlsc
