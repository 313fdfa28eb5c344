#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/io.hpp"
#include "wms/nn/tinynet.hpp"

namespace wms::nn {

// Checkpoint layout (all integers u32 little-endian, floats f32 little-endian):
//   "WCK1" <u32 version=1> <u32 blob_count>
//   per blob: <u32 name_len> <name bytes> <u32 rank> <u32 dim>*rank <f32 data>*prod(dims)
// Architecture is stored as blobs named "meta.*" ahead of the parameters.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const TinyNetParams& p) {
  std::vector<Param> blobs;
  const auto& cfg = p.config;
  std::vector<float> strides;
  for (const auto& l : cfg.encoder) strides.push_back(static_cast<float>(l.stride));
  blobs.push_back({"meta.image_size", {1}, {static_cast<float>(cfg.image_size)}});
  blobs.push_back({"meta.n_classes", {1}, {static_cast<float>(cfg.n_classes)}});
  blobs.push_back({"meta.n_subclasses", {1}, {static_cast<float>(cfg.n_subclasses)}});
  blobs.push_back({"meta.strides", {strides.size()}, strides});
  std::vector<float> seed16;  // init seed split into four exactly-representable 16-bit words
  for (int i = 0; i < 4; ++i) seed16.push_back(static_cast<float>((cfg.init_seed >> (16 * i)) & 0xFFFF));
  blobs.push_back({"meta.init_seed", {4}, seed16});
  for (const auto& t : p.params) blobs.push_back(t);

  std::string out = "WCK1";
  io::detail::put_u32(out, kCheckpointVersion);
  io::detail::put_u32(out, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& b : blobs) {
    io::detail::put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    io::detail::put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) io::detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : b.data) io::detail::put_f32(out, v);
  }
  return out;
}

inline TinyNetParams decode_checkpoint(const std::string& bytes, const std::string& what = "checkpoint") {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw Error(what + ": truncated");
  };
  auto u32 = [&] {
    need(4);
    const auto v = io::detail::get_u32(reinterpret_cast<const unsigned char*>(bytes.data() + pos));
    pos += 4;
    return v;
  };
  need(4);
  if (bytes.compare(0, 4, "WCK1") != 0) throw Error(what + ": not a WCK1 checkpoint");
  pos = 4;
  if (const auto v = u32(); v != kCheckpointVersion) throw Error(what + ": unsupported version " + std::to_string(v));
  const std::uint32_t count = u32();
  std::vector<Param> blobs;
  for (std::uint32_t b = 0; b < count; ++b) {
    Param t;
    const auto len = u32();
    need(len);
    t.name = bytes.substr(pos, len);
    pos += len;
    const auto rank = u32();
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(u32());
      n *= t.shape.back();
    }
    need(4 * n);
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      t.data[i] = io::detail::get_f32(reinterpret_cast<const unsigned char*>(bytes.data() + pos + 4 * i));
    pos += 4 * n;
    blobs.push_back(std::move(t));
  }
  if (pos != bytes.size()) throw Error(what + ": trailing bytes");
  constexpr std::size_t kMeta = 5;
  if (blobs.size() < kMeta || blobs[0].name != "meta.image_size" || blobs[3].name != "meta.strides" ||
      blobs[4].name != "meta.init_seed" || blobs[4].data.size() != 4)
    throw Error(what + ": missing architecture metadata");

  TinyNetParams p;
  p.config.image_size = static_cast<std::size_t>(blobs[0].data.at(0));
  p.config.n_classes = static_cast<std::size_t>(blobs[1].data.at(0));
  p.config.n_subclasses = static_cast<std::size_t>(blobs[2].data.at(0));
  for (int i = 0; i < 4; ++i)
    p.config.init_seed |= static_cast<std::uint64_t>(blobs[4].data[static_cast<std::size_t>(i)]) << (16 * i);
  const auto& strides = blobs[3].data;
  p.config.encoder.clear();
  for (std::size_t l = 0; l < strides.size(); ++l) {
    const std::size_t wi = kMeta + 2 * l;
    if (wi >= blobs.size() || blobs[wi].shape.size() != 4) throw Error(what + ": malformed conv blob");
    p.config.encoder.push_back({blobs[wi].shape[0], static_cast<std::size_t>(strides[l])});
  }
  p.params.assign(blobs.begin() + kMeta, blobs.end());
  const TinyNetParams ref = init_params(p.config);
  if (ref.params.size() != p.params.size()) throw Error(what + ": parameter count mismatch");
  for (std::size_t i = 0; i < ref.params.size(); ++i) {
    if (ref.params[i].name != p.params[i].name || ref.params[i].shape != p.params[i].shape)
      throw Error(what + ": unexpected blob " + p.params[i].name);
  }
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const TinyNetParams& p) {
  io::write_file(path, encode_checkpoint(p));
}

inline TinyNetParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace wms::nn
