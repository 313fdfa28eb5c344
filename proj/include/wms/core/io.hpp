#pragma once

#include <array>
#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"

namespace wms::io {

namespace fs = std::filesystem;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace detail

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// WCF1: 16-byte header "WCF1" <u32 h> <u32 w> <u32 reserved=0>, then h*w
// little-endian float32 values in row-major order.

inline std::string encode_wcf(const Field2D& f) {
  std::string out = "WCF1";
  detail::put_u32(out, static_cast<std::uint32_t>(f.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(f.width()));
  detail::put_u32(out, 0);
  out.reserve(16 + 4 * f.size());
  for (double v : f.values()) detail::put_f32(out, static_cast<float>(v));
  return out;
}

inline Field2D decode_wcf(const std::string& bytes, const std::string& what = "WCF1 data") {
  if (bytes.size() < 16 || bytes.compare(0, 4, "WCF1") != 0) throw Error(what + ": not a WCF1 file");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t h = detail::get_u32(p + 4);
  const std::uint32_t w = detail::get_u32(p + 8);
  if (h == 0 || w == 0) throw Error(what + ": zero dimension");
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (bytes.size() != 16 + 4 * n) throw Error(what + ": truncated or oversized payload");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = detail::get_f32(p + 16 + 4 * i);
    if (!std::isfinite(v[i])) throw Error(what + ": non-finite value");
  }
  return Field2D(h, w, std::move(v));
}

inline void write_wcf(const fs::path& path, const Field2D& f) { write_file(path, encode_wcf(f)); }

inline Field2D read_wcf(const fs::path& path) { return decode_wcf(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Binary PGM (P5), maxval 255.

inline std::string encode_pgm(const LabelMap& m) {
  std::string out = "P5\n" + std::to_string(m.width()) + " " + std::to_string(m.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(m.values().data()), m.size());
  return out;
}

inline LabelMap decode_pgm(const std::string& bytes, const std::string& what = "PGM data") {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_ws();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error(what + ": malformed PGM header");
    return std::stol(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error(what + ": not a binary PGM (P5)");
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w <= 0 || h <= 0) throw Error(what + ": bad dimensions");
  if (maxval != 255) throw Error(what + ": only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw Error(what + ": malformed PGM header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos != n) throw Error(what + ": pixel payload size mismatch");
  std::vector<std::uint8_t> px(n);
  std::memcpy(px.data(), bytes.data() + pos, n);
  return LabelMap(static_cast<std::size_t>(h), static_cast<std::size_t>(w), std::move(px));
}

inline void write_pgm(const fs::path& path, const LabelMap& m) { write_file(path, encode_pgm(m)); }

inline LabelMap read_pgm(const fs::path& path) {
  if (!fs::exists(path)) throw Error("missing file: " + path.string());
  return decode_pgm(read_file(path), path.string());
}

/// Quantize a [0,1] field to 0..255 (round to nearest).
inline LabelMap quantize_unit(const Field2D& f) {
  LabelMap m(f.height(), f.width(), 0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = std::clamp(f[i], 0.0, 1.0);
    m[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return m;
}

inline Field2D dequantize_unit(const LabelMap& m) {
  Field2D f(m.height(), m.width(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) f[i] = static_cast<double>(m[i]) / 255.0;
  return f;
}

}  // namespace wms::io
