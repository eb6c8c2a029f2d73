#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fws/errors.hpp"

namespace fws {

using Bytes = std::vector<std::uint8_t>;

// Little-endian serializer used by all on-disk formats the toolkit owns.
class ByteWriter {
public:
    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { append_le(v); }
    void u32(std::uint32_t v) { append_le(v); }
    void u64(std::uint64_t v) { append_le(v); }
    void i8(std::int8_t v) { buf_.push_back(static_cast<std::uint8_t>(v)); }
    void i32(std::int32_t v) { append_le(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { append_le(static_cast<std::uint64_t>(v)); }
    void f32(float v) { append_le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { append_le(std::bit_cast<std::uint64_t>(v)); }

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }

    // u16 length prefix + bytes.
    void str(const std::string& s) {
        if (s.size() > 0xFFFF) throw ConfigError("string too long to serialize");
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }

private:
    template <typename T>
    void append_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    Bytes buf_;
};

// Bounds-checked reader over a byte span. Every primitive read validates the
// remaining length first, so a truncated or hostile buffer raises a data
// error (with the failing offset) instead of reading out of bounds. `label`
// names the format in error messages.
class ByteReader {
public:
    ByteReader(const Bytes& b, std::string label)
        : p_(b.data()), size_(b.size()), label_(std::move(label)) {}
    ByteReader(const std::uint8_t* p, std::size_t n, std::string label)
        : p_(p), size_(n), label_(std::move(label)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }
    bool done() const { return pos_ == size_; }

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return read_le<std::uint16_t>(); }
    std::uint32_t u32() { return read_le<std::uint32_t>(); }
    std::uint64_t u64() { return read_le<std::uint64_t>(); }
    std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    // Big-endian u16 (only the legacy stream uses network order).
    std::uint16_t u16_be() {
        const std::uint8_t* b = take(2);
        return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
    }

    std::string str() {
        const std::uint16_t n = u16();
        const std::uint8_t* b = take(n);
        return std::string(reinterpret_cast<const char*>(b), n);
    }

    const std::uint8_t* take(std::size_t n) {
        if (n > remaining()) {
            throw DataError(label_ + ": truncated at byte offset " + std::to_string(pos_) +
                            " (need " + std::to_string(n) + " bytes, have " +
                            std::to_string(remaining()) + ")");
        }
        const std::uint8_t* at = p_ + pos_;
        pos_ += n;
        return at;
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw DataError(label_ + ": " + why + " at byte offset " + std::to_string(pos_));
    }

private:
    template <typename T>
    T read_le() {
        const std::uint8_t* b = take(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<T>(b[i]) << (8 * i));
        }
        return v;
    }

    const std::uint8_t* p_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string label_;
};

inline Bytes read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    Bytes b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw DataError("read failed: " + path);
    return b;
}

inline void write_file(const std::string& path, const Bytes& b) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot create file: " + path);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!f) throw DataError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot create file: " + path);
    f << text;
    if (!f) throw DataError("write failed: " + path);
}

}  // namespace fws
