#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "depprobe/error.hpp"

namespace depprobe::detail {

// Little-endian primitives shared by the EMBF and DPRB codecs.
class LeWriter {
public:
    explicit LeWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { put(&v, 1); }

    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        put(b, 4);
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void f32s(std::span<const float> values) {
        if constexpr (std::endian::native == std::endian::little) {
            put(values.data(), values.size() * sizeof(float));
        } else {
            for (float v : values) f32(v);
        }
    }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        put(s.data(), s.size());
    }

    void raw(const char* data, std::size_t n) { put(data, n); }

    std::uint64_t written() const { return written_; }

private:
    void put(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw InputError("write failed after " + std::to_string(written_) + " bytes");
        written_ += n;
    }

    std::ostream& out_;
    std::uint64_t written_ = 0;
};

class LeReader {
public:
    LeReader(std::istream& in, std::string format) : in_(in), format_(std::move(format)) {}

    std::uint8_t u8(const char* what) {
        unsigned char b = 0;
        get(&b, 1, what);
        return b;
    }

    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        get(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    void f32s(std::span<float> out, const char* what) {
        get(out.data(), out.size() * sizeof(float), what);
        if constexpr (std::endian::native != std::endian::little) {
            for (auto& v : out) {
                auto u = std::bit_cast<std::uint32_t>(v);
                u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
                v = std::bit_cast<float>(u);
            }
        }
    }

    std::string str(const char* what) {
        const auto n = u32(what);
        if (n > (1u << 24)) {
            throw InputError(format_ + ": implausible " + what + " length " + std::to_string(n));
        }
        std::string s(n, '\0');
        get(s.data(), n, what);
        return s;
    }

    void magic(const char (&expected)[5]) {
        char m[4];
        get(m, 4, "magic");
        if (std::string(m, 4) != std::string(expected, 4)) {
            throw InputError(format_ + ": bad magic (expected \"" + std::string(expected, 4) + "\")");
        }
    }

    // Throws if any bytes remain.
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw InputError(format_ + ": trailing bytes after offset " + std::to_string(read_));
        }
    }

    std::uint64_t offset() const { return read_; }

private:
    void get(void* data, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        read_ += got;
        if (got != n) {
            throw InputError(format_ + ": truncated " + what + " at offset " +
                             std::to_string(read_ - got) + ": expected " + std::to_string(n) +
                             " bytes, got " + std::to_string(got));
        }
    }

    std::istream& in_;
    std::string format_;
    std::uint64_t read_ = 0;
};

}  // namespace depprobe::detail
