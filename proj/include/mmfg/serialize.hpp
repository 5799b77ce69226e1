#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mmfg/grid.hpp"

namespace mmfg {

inline constexpr char kFieldMagic[4] = {'M', 'M', 'F', 'G'};
inline constexpr std::uint32_t kFieldVersion = 1;

/// CSV dump: one row per cell, "x,value".
inline void write_field_csv(std::ostream& os, const PeriodicGrid& g,
                            const std::vector<double>& v) {
    os << "x,value\n" << std::setprecision(17);
    for (int j = 0; j < g.n; ++j) os << g.x(j) << ',' << v[j] << '\n';
}

inline void write_field_csv(const std::string& path, const ScalarField& f) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_field_csv(os, f.grid, f.values);
}

inline void write_field_csv(const std::string& path, const DensityField& f) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_field_csv(os, f.grid, f.mass);
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

/// Binary dump: magic "MMFG", version u32, n u32, then n little-endian f64.
inline void write_field_binary(const std::string& path, const PeriodicGrid& g,
                               const std::vector<double>& v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.write(kFieldMagic, 4);
    detail::put_u32(os, kFieldVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(g.n));
    for (double x : v) detail::put_f64(os, x);
}

inline void write_field_binary(const std::string& path, const ScalarField& f) {
    write_field_binary(path, f.grid, f.values);
}
inline void write_field_binary(const std::string& path, const DensityField& f) {
    write_field_binary(path, f.grid, f.mass);
}

inline ScalarField read_field_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, kFieldMagic, 4) != 0)
        throw std::runtime_error("bad magic in " + path);
    std::uint32_t version = detail::get_u32(is);
    if (version != kFieldVersion) throw std::runtime_error("unsupported version");
    std::uint32_t n = detail::get_u32(is);
    ScalarField f(PeriodicGrid(static_cast<int>(n)));
    for (std::uint32_t j = 0; j < n; ++j) f.values[j] = detail::get_f64(is);
    if (!is) throw std::runtime_error("truncated field file " + path);
    return f;
}

}  // namespace mmfg
