#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "m2ae/errors.hpp"

// Little-endian primitive IO shared by the dataset and checkpoint formats.

namespace m2ae {

inline void write_bytes_le(std::ostream& os, std::uint64_t v, int n_bytes) {
    char buf[8];
    for (int i = 0; i < n_bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, n_bytes);
}

inline std::uint64_t read_bytes_le(std::istream& is, int n_bytes, const char* what) {
    char buf[8];
    is.read(buf, n_bytes);
    if (is.gcount() != n_bytes) throw IoError(std::string("truncated file while reading ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < n_bytes; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

inline void write_u16(std::ostream& os, std::uint16_t v) { write_bytes_le(os, v, 2); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_bytes_le(os, v, 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_bytes_le(os, v, 8); }
inline void write_u8(std::ostream& os, std::uint8_t v) { write_bytes_le(os, v, 1); }

inline void write_f32(std::ostream& os, float v) {
    write_bytes_le(os, std::bit_cast<std::uint32_t>(v), 4);
}

inline void write_f64(std::ostream& os, double v) {
    write_bytes_le(os, std::bit_cast<std::uint64_t>(v), 8);
}

inline std::uint16_t read_u16(std::istream& is, const char* what) {
    return static_cast<std::uint16_t>(read_bytes_le(is, 2, what));
}
inline std::uint32_t read_u32(std::istream& is, const char* what) {
    return static_cast<std::uint32_t>(read_bytes_le(is, 4, what));
}
inline std::uint64_t read_u64(std::istream& is, const char* what) {
    return read_bytes_le(is, 8, what);
}
inline std::uint8_t read_u8(std::istream& is, const char* what) {
    return static_cast<std::uint8_t>(read_bytes_le(is, 1, what));
}

inline float read_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(read_u32(is, what));
}

inline double read_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(read_u64(is, what));
}

}  // namespace m2ae
