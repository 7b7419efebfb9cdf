#pragma once

// Little-endian primitive encoding for the isokit binary formats. Written
// byte-by-byte so files are portable across hosts.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "isokit/error.hpp"

namespace isokit::binary {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    out.write(b.data(), b.size());
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    out.write(b.data(), b.size());
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), magic.size()); }

inline std::uint64_t read_le(std::istream& in, int n_bytes, std::string_view what) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), n_bytes);
    if (in.gcount() != n_bytes) {
        throw MalformedFileError("truncated file while reading " + std::string(what));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n_bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint32_t read_u32(std::istream& in, std::string_view what) {
    return static_cast<std::uint32_t>(read_le(in, 4, what));
}
inline std::uint64_t read_u64(std::istream& in, std::string_view what) { return read_le(in, 8, what); }
inline double read_f64(std::istream& in, std::string_view what) {
    return std::bit_cast<double>(read_le(in, 8, what));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (in.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic) {
        throw MalformedFileError("bad magic bytes, expected \"" + std::string(magic) + "\"");
    }
}

}  // namespace isokit::binary
