#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wms/core/distance.hpp"
#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/io.hpp"
#include "wms/core/rng.hpp"
#include "wms/synth/dataset.hpp"

namespace wms::prompt {

struct PointPrompt {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t grid_index = 0;  // row-major index within the prompt grid
  std::size_t sample_id = 0;

  bool operator==(const PointPrompt&) const = default;
};

struct PromptMask {
  Field2D mask;  // values in [0,1], full image resolution
  PointPrompt prompt;
};

enum class OracleKind { synthetic, external };

struct OracleConfig {
  OracleKind kind = OracleKind::synthetic;
  double boundary_noise_sigma = 0.0;
  double leakage_prob = 0.0;
  std::size_t background_radius = 4;
  std::uint64_t seed = 0;
  std::filesystem::path store_dir;  // external oracle only

  void validate() const {
    wms::detail::require(leakage_prob >= 0.0 && leakage_prob <= 1.0, "OracleConfig: leakage_prob must be in [0, 1]");
    wms::detail::require(boundary_noise_sigma >= 0.0, "OracleConfig: boundary_noise_sigma must be >= 0");
    wms::detail::require(kind != OracleKind::external || !store_dir.empty(),
                         "OracleConfig: external oracle needs a store directory");
  }
};

/// Centre points of a g x g grid over a square image, in row-major order.
/// Cell i spans [floor(i*S/g), floor((i+1)*S/g)); its centre is the floor of the midpoint.
inline std::vector<PointPrompt> grid_prompts(std::size_t image_size, std::size_t g, std::size_t sample_id = 0) {
  wms::detail::require(g >= 1 && g <= image_size, "grid_prompts: grid must satisfy 1 <= g <= image_size");
  std::vector<PointPrompt> out;
  out.reserve(g * g);
  auto centre = [&](std::size_t i) { return (i * image_size / g + (i + 1) * image_size / g) / 2; };
  for (std::size_t gr = 0; gr < g; ++gr)
    for (std::size_t gc = 0; gc < g; ++gc) out.push_back({centre(gr), centre(gc), gr * g + gc, sample_id});
  return out;
}

/// Anything that maps a point prompt on a sample to a mask prediction.
class PromptOracle {
 public:
  virtual ~PromptOracle() = default;
  virtual PromptMask mask(const synth::Sample& sample, const PointPrompt& prompt) const = 0;
};

namespace detail {

/// 4-connected flood fill over cells equal to `region`, optionally restricted to a disk.
inline Grid<std::uint8_t> flood_region(const RegionMap& regions, std::size_t r0, std::size_t c0,
                                       double disk_radius) {
  const std::size_t h = regions.height();
  const std::size_t w = regions.width();
  const std::int32_t id = regions(r0, c0);
  const double r2 = disk_radius * disk_radius;
  auto allowed = [&](std::size_t r, std::size_t c) {
    if (regions(r, c) != id) return false;
    if (disk_radius <= 0.0) return true;
    const double dr = static_cast<double>(r) - static_cast<double>(r0);
    const double dc = static_cast<double>(c) - static_cast<double>(c0);
    return dr * dr + dc * dc <= r2;
  };
  Grid<std::uint8_t> out(h, w, 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{r0, c0}};
  out(r0, c0) = 1;
  while (!stack.empty()) {
    const auto [r, c] = stack.back();
    stack.pop_back();
    const std::pair<long, long> nbrs[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (const auto& [dr, dc] : nbrs) {
      const long nr = static_cast<long>(r) + dr;
      const long nc = static_cast<long>(c) + dc;
      if (nr < 0 || nc < 0 || nr >= static_cast<long>(h) || nc >= static_cast<long>(w)) continue;
      const auto ur = static_cast<std::size_t>(nr);
      const auto uc = static_cast<std::size_t>(nc);
      if (out(ur, uc) || !allowed(ur, uc)) continue;
      out(ur, uc) = 1;
      stack.emplace_back(ur, uc);
    }
  }
  return out;
}

inline Grid<std::uint8_t> complement(const Grid<std::uint8_t>& m) {
  Grid<std::uint8_t> out(m.height(), m.width(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
  return out;
}

}  // namespace detail

/// Structural oracle over the synthetic benchmark's latent region map.
///
/// A prompt selects the connected region under it (clipped to a disk of
/// background_radius when it lands on background). Optional imperfections:
/// Gaussian jitter of the boundary (per-pixel threshold on signed distance)
/// and, with probability leakage_prob, a one-step 4-neighbour dilation.
class SyntheticOracle final : public PromptOracle {
 public:
  explicit SyntheticOracle(OracleConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  PromptMask mask(const synth::Sample& sample, const PointPrompt& p) const override {
    if (sample.structure_id.empty()) {
      throw Error("synthetic oracle: sample " + synth::sample_name(sample.id) +
                  " has no structure map; use the external oracle");
    }
    const RegionMap& regions = sample.structure_id;
    wms::detail::require(p.row < regions.height() && p.col < regions.width(),
                         "synthetic oracle: prompt outside the image");
    const bool on_background = regions(p.row, p.col) == 0;
    Grid<std::uint8_t> m = detail::flood_region(
        regions, p.row, p.col, on_background ? static_cast<double>(cfg_.background_radius) : 0.0);

    SeededRng rng(mix_seed(mix_seed(cfg_.seed, sample.id), p.row * 65536 + p.col));
    if (cfg_.boundary_noise_sigma > 0.0) {
      const auto d_out = squared_distance_transform(detail::complement(m));  // inside: distance to outside
      const auto d_in = squared_distance_transform(m);                      // outside: distance to inside
      Grid<std::uint8_t> jittered(m.height(), m.width(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double signed_dist = m[i] ? std::sqrt(static_cast<double>(d_out[i]))
                                         : -std::sqrt(static_cast<double>(d_in[i]));
        jittered[i] = signed_dist - 0.5 + cfg_.boundary_noise_sigma * rng.normal() > 0.0 ? 1 : 0;
      }
      jittered(p.row, p.col) = 1;
      m = std::move(jittered);
    }
    if (cfg_.leakage_prob > 0.0 && rng.bernoulli(cfg_.leakage_prob)) {
      Grid<std::uint8_t> grown = m;
      for (std::size_t r = 0; r < m.height(); ++r) {
        for (std::size_t c = 0; c < m.width(); ++c) {
          if (m(r, c)) continue;
          const bool touch = (r > 0 && m(r - 1, c)) || (r + 1 < m.height() && m(r + 1, c)) ||
                             (c > 0 && m(r, c - 1)) || (c + 1 < m.width() && m(r, c + 1));
          if (touch) grown(r, c) = 1;
        }
      }
      m = std::move(grown);
    }
    PromptMask out{Field2D(m.height(), m.width(), 0.0), p};
    for (std::size_t i = 0; i < m.size(); ++i) out.mask[i] = m[i] ? 1.0 : 0.0;
    return out;
  }

  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
};

/// Path of a stored mask: <store>/<sample name>/<grid_index>.pgm
inline std::filesystem::path mask_store_path(const std::filesystem::path& store, const PointPrompt& p) {
  return store / synth::sample_name(p.sample_id) / (std::to_string(p.grid_index) + ".pgm");
}

/// Loads masks precomputed offline by any SAM-like tool.
class ExternalOracle final : public PromptOracle {
 public:
  explicit ExternalOracle(std::filesystem::path store_dir) : store_(std::move(store_dir)) {}

  PromptMask mask(const synth::Sample& sample, const PointPrompt& p) const override {
    const auto path = mask_store_path(store_, p);
    if (!std::filesystem::exists(path)) throw Error("external oracle: missing mask file " + path.string());
    const LabelMap raw = io::read_pgm(path);
    if (raw.height() != sample.image.height() || raw.width() != sample.image.width()) {
      throw Error("external oracle: " + path.string() + " is " + std::to_string(raw.height()) + "x" +
                  std::to_string(raw.width()) + ", expected " + std::to_string(sample.image.height()) + "x" +
                  std::to_string(sample.image.width()));
    }
    return {io::dequantize_unit(raw), p};
  }

 private:
  std::filesystem::path store_;
};

inline std::unique_ptr<PromptOracle> make_oracle(const OracleConfig& cfg) {
  cfg.validate();
  if (cfg.kind == OracleKind::external) return std::make_unique<ExternalOracle>(cfg.store_dir);
  return std::make_unique<SyntheticOracle>(cfg);
}

}  // namespace wms::prompt
