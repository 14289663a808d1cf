#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crlsc/binio.hpp"
#include "crlsc/knowledge_base.hpp"

// Wire protocol (little-endian): frame = len u32 | type u8 | payload,
// where len counts type + payload bytes. Max frame 16 MiB.

namespace crlsc::wire {

inline constexpr std::uint32_t kMaxFrameLen = 16 * 1024 * 1024;
inline constexpr std::uint8_t kProtocolVersion = 1;

enum class MsgType : std::uint8_t {
    Hello = 0x00,
    QueryRequest = 0x01,
    QueryResponse = 0x02,
    InfoRequest = 0x03,
    InfoResponse = 0x04,
    Error = 0x7F,
};

enum ErrorCode : std::uint16_t {
    kErrDimensionMismatch = 1,
    kErrOversizedFrame = 2,
    kErrUnknownType = 3,
    kErrMalformed = 4,
    kErrVersionMismatch = 5,
    kErrQuery = 6,
};

struct Hello {
    std::uint8_t version = kProtocolVersion;
};

struct QueryRequest {
    std::uint32_t n = 0;
    std::vector<float> q;  // length d
};

struct QueryItem {
    std::uint64_t id = 0;
    float dist = 0.0f;
    std::vector<float> vec;
};

struct QueryResponse {
    std::vector<QueryItem> items;
};

struct InfoRequest {};

struct InfoResponse {
    std::uint32_t d = 0;
    std::uint32_t m = 0;
    std::uint32_t k_star = 0;
    std::uint64_t n_entries = 0;
    std::string source_tag;
};

struct ErrorResponse {
    std::uint16_t code = 0;
    std::string message;
};

struct Frame {
    MsgType type = MsgType::Error;
    std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> encode_frame(MsgType type,
                                              const std::vector<std::uint8_t>& payload) {
    const std::uint32_t len = static_cast<std::uint32_t>(payload.size() + 1);
    if (len > kMaxFrameLen) throw ValidationError("encode_frame: frame too large");
    std::vector<std::uint8_t> out;
    out.reserve(4 + len);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    out.push_back(static_cast<std::uint8_t>(type));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

// --- payload codecs -------------------------------------------------------

inline std::vector<std::uint8_t> encode(const Hello& m) {
    binio::Writer w;
    w.put<std::uint8_t>(m.version);
    return w.bytes();
}

inline Hello decode_hello(binio::Reader r) {
    Hello m;
    m.version = r.get<std::uint8_t>("hello.version");
    if (!r.exhausted()) throw ParseError("hello: trailing bytes");
    return m;
}

inline std::vector<std::uint8_t> encode(const QueryRequest& m) {
    binio::Writer w;
    w.put<std::uint32_t>(m.n);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.q.size()));
    for (float v : m.q) w.put<float>(v);
    return w.bytes();
}

inline QueryRequest decode_query_request(binio::Reader r) {
    QueryRequest m;
    m.n = r.get<std::uint32_t>("query.n");
    const auto d = r.get<std::uint32_t>("query.d");
    if (static_cast<std::size_t>(d) * 4 != r.remaining())
        throw ParseError("query: payload size does not match d");
    m.q.resize(d);
    for (float& v : m.q) v = r.get<float>("query.q");
    return m;
}

inline std::vector<std::uint8_t> encode(const QueryResponse& m) {
    binio::Writer w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.items.size()));
    for (const QueryItem& it : m.items) {
        w.put<std::uint64_t>(it.id);
        w.put<float>(it.dist);
        for (float v : it.vec) w.put<float>(v);
    }
    return w.bytes();
}

// The item vector length d is not carried explicitly; it is recovered from
// the payload size (count x (12 + 4d) bytes).
inline QueryResponse decode_query_response(binio::Reader r) {
    QueryResponse m;
    const auto count = r.get<std::uint32_t>("response.count");
    if (count == 0) {
        if (!r.exhausted()) throw ParseError("response: trailing bytes");
        return m;
    }
    const std::size_t rem = r.remaining();
    if (rem % count != 0) throw ParseError("response: ragged payload");
    const std::size_t per = rem / count;
    if (per < 12 || (per - 12) % 4 != 0) throw ParseError("response: bad item size");
    const std::size_t d = (per - 12) / 4;
    m.items.resize(count);
    for (QueryItem& it : m.items) {
        it.id = r.get<std::uint64_t>("response.id");
        it.dist = r.get<float>("response.dist");
        it.vec.resize(d);
        for (float& v : it.vec) v = r.get<float>("response.vec");
    }
    return m;
}

inline std::vector<std::uint8_t> encode(const InfoRequest&) { return {}; }

inline std::vector<std::uint8_t> encode(const InfoResponse& m) {
    binio::Writer w;
    w.put<std::uint32_t>(m.d);
    w.put<std::uint32_t>(m.m);
    w.put<std::uint32_t>(m.k_star);
    w.put<std::uint64_t>(m.n_entries);
    w.put_str16(m.source_tag);
    return w.bytes();
}

inline InfoResponse decode_info_response(binio::Reader r) {
    InfoResponse m;
    m.d = r.get<std::uint32_t>("info.d");
    m.m = r.get<std::uint32_t>("info.m");
    m.k_star = r.get<std::uint32_t>("info.k_star");
    m.n_entries = r.get<std::uint64_t>("info.N");
    m.source_tag = r.get_str16("info.source_tag");
    if (!r.exhausted()) throw ParseError("info: trailing bytes");
    return m;
}

inline std::vector<std::uint8_t> encode(const ErrorResponse& m) {
    binio::Writer w;
    w.put<std::uint16_t>(m.code);
    w.put_str16(m.message);
    return w.bytes();
}

inline ErrorResponse decode_error_response(binio::Reader r) {
    ErrorResponse m;
    m.code = r.get<std::uint16_t>("error.code");
    m.message = r.get_str16("error.message");
    if (!r.exhausted()) throw ParseError("error: trailing bytes");
    return m;
}

// Serialize local search hits exactly as the server does, so byte-level
// comparisons between the local and networked paths are possible.
inline QueryResponse to_query_response(const std::vector<SearchHit>& hits) {
    QueryResponse resp;
    resp.items.reserve(hits.size());
    for (const SearchHit& h : hits)
        resp.items.push_back({h.id, static_cast<float>(h.dist), h.vec});
    return resp;
}

}  // namespace crlsc::wire
