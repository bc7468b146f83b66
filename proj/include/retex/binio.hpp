#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "retex/common.hpp"

// Little-endian binary readers/writers shared by the encoder-parameter and
// index file formats. Reads validate length up front so a truncated file
// surfaces as a structured error instead of UB.

namespace retex::binio {

inline void write_bytes(std::ostream& os, const void* data, std::size_t n) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os) throw Error("binio: write failed");
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_bytes(os, &v, 8); }

inline void write_f64(std::ostream& os, const double* data, std::size_t count) {
    write_bytes(os, data, count * sizeof(double));
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    if (!s.empty()) write_bytes(os, s.data(), s.size());
}

inline void read_bytes(std::istream& is, void* data, std::size_t n, const char* what) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw Error(std::string("corrupt file: truncated while reading ") + what);
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    read_bytes(is, &v, 4, what);
    return v;
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v = 0;
    read_bytes(is, &v, 8, what);
    return v;
}

inline void read_f64(std::istream& is, double* data, std::size_t count, const char* what) {
    read_bytes(is, data, count * sizeof(double), what);
}

inline std::string read_string(std::istream& is, const char* what, std::uint64_t max_len = 1u << 20) {
    std::uint64_t n = read_u64(is, what);
    if (n > max_len) throw Error(std::string("corrupt file: implausible length for ") + what);
    std::string s(n, '\0');
    if (n) read_bytes(is, s.data(), n, what);
    return s;
}

static_assert(sizeof(double) == 8, "format assumes 64-bit IEEE doubles");

}  // namespace retex::binio
