#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "crlsc/error.hpp"

// Little-endian binary stream helpers shared by the KB/codebook/dataset
// file formats and the wire protocol.

namespace crlsc::binio {

template <typename T>
inline void write_raw(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_raw(os, v); }
inline void write_u16(std::ostream& os, std::uint16_t v) { write_raw(os, v); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_raw(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_raw(os, v); }
inline void write_i32(std::ostream& os, std::int32_t v) { write_raw(os, v); }
inline void write_f32(std::ostream& os, float v) { write_raw(os, v); }

template <typename T>
inline T read_raw(std::istream& is, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ParseError(std::string("truncated while reading ") + what);
    return v;
}

inline std::uint8_t read_u8(std::istream& is, const char* what) { return read_raw<std::uint8_t>(is, what); }
inline std::uint16_t read_u16(std::istream& is, const char* what) { return read_raw<std::uint16_t>(is, what); }
inline std::uint32_t read_u32(std::istream& is, const char* what) { return read_raw<std::uint32_t>(is, what); }
inline std::uint64_t read_u64(std::istream& is, const char* what) { return read_raw<std::uint64_t>(is, what); }
inline std::int32_t read_i32(std::istream& is, const char* what) { return read_raw<std::int32_t>(is, what); }
inline float read_f32(std::istream& is, const char* what) { return read_raw<float>(is, what); }

inline void write_str16(std::ostream& os, const std::string& s) {
    if (s.size() > 0xFFFF) throw ValidationError("string too long for u16 length prefix");
    write_u16(os, static_cast<std::uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str16(std::istream& is, const char* what) {
    const std::uint16_t len = read_u16(is, what);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw ParseError(std::string("truncated while reading ") + what);
    return s;
}

// Buffer-based counterparts used by the wire protocol.
class Writer {
public:
    std::vector<std::uint8_t>& bytes() { return buf_; }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_str16(const std::string& s) {
        put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    explicit Reader(const std::vector<std::uint8_t>& v) : Reader(v.data(), v.size()) {}

    template <typename T>
    T get(const char* what) {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > size_)
            throw ParseError(std::string("truncated while reading ") + what);
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_str16(const char* what) {
        const auto len = get<std::uint16_t>(what);
        if (pos_ + len > size_)
            throw ParseError(std::string("truncated while reading ") + what);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
        pos_ += len;
        return s;
    }
    std::size_t remaining() const { return size_ - pos_; }
    bool exhausted() const { return pos_ == size_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace crlsc::binio
