#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitives shared by the dataset and checkpoint formats.
namespace cvs::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void write_f32(std::ostream& out, float v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

inline void write_f32s(std::ostream& out, const float* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError(std::string("truncated file while reading ") + what);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v;
    read_exact(in, &v, sizeof v, what);
    return v;
}
inline std::uint64_t read_u64(std::istream& in, const char* what) {
    std::uint64_t v;
    read_exact(in, &v, sizeof v, what);
    return v;
}
inline float read_f32(std::istream& in, const char* what) {
    float v;
    read_exact(in, &v, sizeof v, what);
    return v;
}
inline double read_f64(std::istream& in, const char* what) {
    double v;
    read_exact(in, &v, sizeof v, what);
    return v;
}
inline void read_f32s(std::istream& in, float* dst, std::size_t n, const char* what) {
    read_exact(in, dst, n * sizeof(float), what);
}
inline std::string read_string(std::istream& in, const char* what) {
    const std::uint32_t n = read_u32(in, what);
    if (n > (1u << 24)) throw FormatError(std::string("implausible string length while reading ") + what);
    std::string s(n, '\0');
    read_exact(in, s.data(), n, what);
    return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4];
    read_exact(in, buf, 4, "magic");
    if (std::memcmp(buf, magic, 4) != 0) throw FormatError(std::string("bad magic: expected '") + magic + "'");
}

/// 64-bit FNV-1a, used to fingerprint files.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace cvs::io
