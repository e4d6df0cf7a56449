#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Explicit little-endian scalar IO so binary artifacts are byte-identical
// across platforms regardless of host endianness.

namespace tracksort::io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& out, float v) {
    write_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64(std::ostream& out, double v) {
    write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("binary read: unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t lo = read_u32(in);
    std::uint64_t hi = read_u32(in);
    return lo | hi << 32;
}

inline float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& what) {
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw std::runtime_error(what + ": bad magic, expected '" + std::string(magic, 4) + "'");
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::size_t max_len = 1 << 20) {
    std::uint32_t n = read_u32(in);
    if (n > max_len) throw std::runtime_error("binary read: string length " +
                                              std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n))
        throw std::runtime_error("binary read: unexpected end of file in string");
    return s;
}

} // namespace tracksort::io
