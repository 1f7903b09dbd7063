#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "shardnet/errors.hpp"

// Little-endian binary file helpers for the model and cache formats.

namespace shardnet::binio {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

inline uint32_t to_le(uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap32(v);
    }
    return v;
}

inline uint64_t to_le(uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap64(v);
    }
    return v;
}

class Writer {
public:
    explicit Writer(const std::string& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open for writing: " + path);
    }

    void bytes(const void* data, size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }
    void magic(const char* m) { bytes(m, std::strlen(m)); }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u32(uint32_t v) {
        const uint32_t le = to_le(v);
        bytes(&le, 4);
    }
    void u64(uint64_t v) {
        const uint64_t le = to_le(v);
        bytes(&le, 8);
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f32_span(std::span<const float> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(vs.data(), vs.size() * 4);
        } else {
            for (float v : vs) f32(v);
        }
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path)
        : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open for reading: " + path);
    }

    void bytes(void* data, size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw FormatError("truncated file: " + path_);
        }
    }
    void expect_magic(const char* m) {
        const size_t n = std::strlen(m);
        std::string got(n, '\0');
        bytes(got.data(), n);
        if (got != m) {
            throw FormatError("bad magic in " + path_ + ": expected " + m);
        }
    }
    uint8_t u8() {
        uint8_t v;
        bytes(&v, 1);
        return v;
    }
    uint32_t u32() {
        uint32_t v;
        bytes(&v, 4);
        return to_le(v);
    }
    uint64_t u64() {
        uint64_t v;
        bytes(&v, 8);
        return to_le(v);
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void f32_span(std::span<float> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(vs.data(), vs.size() * 4);
        } else {
            for (float& v : vs) v = f32();
        }
    }
    std::string str(size_t max_len = 1 << 20) {
        const uint32_t n = u32();
        if (n > max_len) throw FormatError("oversized string in " + path_);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    std::string path_;
    std::ifstream in_;
};

} // namespace shardnet::binio
