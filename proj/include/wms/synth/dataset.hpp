#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/io.hpp"
#include "wms/core/rng.hpp"

namespace wms::synth {

/// Parameters of the synthetic co-occurrence benchmark.
///
/// Every present target is an ellipse whose stripe frequency and aspect ratio
/// depend on a latent subtype. With probability p_halo_given_target a ring of
/// intermediate texture ("halo") surrounds it. The halo is never part of the
/// ground truth, but it only ever appears next to a target, so an image-level
/// classifier is rewarded for firing on it.
struct SynthConfig {
  std::size_t n_samples = 400;
  std::size_t image_size = 64;
  std::size_t n_classes = 1;
  std::size_t n_latent_subtypes = 4;
  double p_class_present = 0.5;
  double p_halo_given_target = 0.9;
  std::size_t halo_width = 3;
  double texture_noise_sigma = 0.05;
  /// Target radius (geometric mean of the semi-axes) as a fraction of image_size.
  double target_radius_frac = 0.22;
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    wms::detail::require(n_samples >= 1, "SynthConfig: n_samples must be >= 1");
    wms::detail::require(image_size >= 16, "SynthConfig: image_size must be >= 16");
    wms::detail::require(n_classes >= 1 && n_classes <= 127, "SynthConfig: n_classes must be in [1, 127]");
    wms::detail::require(n_latent_subtypes >= 1, "SynthConfig: n_latent_subtypes must be >= 1");
    wms::detail::require(prob(p_class_present), "SynthConfig: p_class_present must be in [0, 1]");
    wms::detail::require(prob(p_halo_given_target), "SynthConfig: p_halo_given_target must be in [0, 1]");
    wms::detail::require(texture_noise_sigma >= 0.0, "SynthConfig: texture_noise_sigma must be >= 0");
    wms::detail::require(target_radius_frac > 0.0, "SynthConfig: target_radius_frac must be > 0");
  }
};

enum class Split : std::uint8_t { none, train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    default: return "none";
  }
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "none" || s.empty()) return Split::none;
  throw Error("unknown split '" + s + "'");
}

/// Latent region ids: 0 is background, target of class c is 2c+1, its halo 2c+2.
constexpr std::int32_t target_region(std::size_t c) { return static_cast<std::int32_t>(2 * c + 1); }
constexpr std::int32_t halo_region(std::size_t c) { return static_cast<std::int32_t>(2 * c + 2); }

struct Sample {
  std::size_t id = 0;
  Field2D image;                         // intensities in [0,1], float32-representable
  std::vector<std::uint8_t> y_p;         // primary labels, length C
  std::vector<std::uint8_t> y_s;         // sub-class labels, length C*K (empty until built)
  LabelMap gt_mask;                      // class id per pixel, 0 = background (evaluation only)
  RegionMap structure_id;                // latent region per pixel (oracle only; may be empty)
  std::vector<int> latent_subtype;       // per class, -1 when absent (diagnostics only)
  Split split = Split::none;

  bool operator==(const Sample&) const = default;
};

inline std::string sample_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", id);
  return buf;
}

struct Dataset {
  std::size_t n_classes = 1;
  std::size_t image_size = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset&) const = default;
};

namespace detail {

struct Blob {
  double cy, cx;     // centre
  double a, b;       // semi-axes along / across the orientation
  double angle;      // orientation in radians
  double reach;      // max semi-axis + halo width
};

inline bool inside_ellipse(const Blob& e, double y, double x) {
  const double dy = y - e.cy;
  const double dx = x - e.cx;
  const double u = dx * std::cos(e.angle) + dy * std::sin(e.angle);
  const double v = -dx * std::sin(e.angle) + dy * std::cos(e.angle);
  return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
}

/// Stripe frequency (cycles per pixel) and aspect ratio for a latent subtype.
inline std::pair<double, double> subtype_shape(int k, std::size_t n_subtypes) {
  const double t = n_subtypes > 1 ? static_cast<double>(k) / static_cast<double>(n_subtypes - 1) : 0.5;
  const double freq = 0.06 + 0.24 * t;
  const double aspect = 1.0 + 1.2 * t;
  return {freq, aspect};
}

inline float to_f32(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

inline Sample generate_sample(const SynthConfig& cfg, std::size_t index) {
  SeededRng rng(mix_seed(cfg.seed, index));
  const std::size_t n = cfg.image_size;
  const double size = static_cast<double>(n);
  Sample s;
  s.id = index;
  s.y_p.assign(cfg.n_classes, 0);
  s.latent_subtype.assign(cfg.n_classes, -1);
  s.gt_mask = LabelMap(n, n, 0);
  s.structure_id = RegionMap(n, n, 0);

  // Background: smooth low-frequency variation plus noise.
  const double bg_phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double bg_phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double bg_level = rng.uniform(0.12, 0.22);

  std::vector<Blob> blobs;
  std::vector<std::size_t> blob_class;
  std::vector<bool> blob_halo;
  std::vector<double> blob_freq;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    if (!rng.bernoulli(cfg.p_class_present)) continue;
    const int k = static_cast<int>(rng.below(cfg.n_latent_subtypes));
    const auto [freq, aspect] = subtype_shape(k, cfg.n_latent_subtypes);
    const double radius = cfg.target_radius_frac * size * rng.uniform(0.85, 1.15);
    Blob e{};
    e.a = radius * std::sqrt(aspect);
    e.b = radius / std::sqrt(aspect);
    e.angle = rng.uniform(0.0, std::numbers::pi);
    e.reach = e.a + static_cast<double>(cfg.halo_width) + 1.0;
    if (2.0 * e.reach > size) {
      throw Error("generate_dataset: sample " + std::to_string(index) + ": target of class " +
                  std::to_string(c) + " (reach " + std::to_string(e.reach) + ") does not fit in a " +
                  std::to_string(n) + "x" + std::to_string(n) + " image");
    }
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      e.cy = rng.uniform(e.reach, size - e.reach);
      e.cx = rng.uniform(e.reach, size - e.reach);
      placed = std::ranges::all_of(blobs, [&](const Blob& o) {
        return std::hypot(o.cy - e.cy, o.cx - e.cx) > o.reach + e.reach;
      });
    }
    if (!placed) {
      throw Error("generate_dataset: sample " + std::to_string(index) +
                  ": cannot place non-overlapping target for class " + std::to_string(c) +
                  "; lower target_radius_frac for multi-class data");
    }
    s.y_p[c] = 1;
    s.latent_subtype[c] = k;
    blobs.push_back(e);
    blob_class.push_back(c);
    blob_halo.push_back(rng.bernoulli(cfg.p_halo_given_target));
    blob_freq.push_back(freq);
  }

  // Target pixels.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> blob_pixels(blobs.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      for (std::size_t b = 0; b < blobs.size(); ++b) {
        if (inside_ellipse(blobs[b], static_cast<double>(r) + 0.5, static_cast<double>(col) + 0.5)) {
          s.structure_id(r, col) = target_region(blob_class[b]);
          s.gt_mask(r, col) = static_cast<std::uint8_t>(blob_class[b] + 1);
          blob_pixels[b].emplace_back(r, col);
          break;
        }
      }
    }
  }
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    if (!blob_pixels[b].empty()) continue;
    const auto r = static_cast<std::size_t>(blobs[b].cy);
    const auto col = static_cast<std::size_t>(blobs[b].cx);
    s.structure_id(r, col) = target_region(blob_class[b]);
    s.gt_mask(r, col) = static_cast<std::uint8_t>(blob_class[b] + 1);
    blob_pixels[b].emplace_back(r, col);
  }
  // Halo pixels: background pixels within halo_width of their target.
  const double hw2 = static_cast<double>(cfg.halo_width * cfg.halo_width);
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    if (!blob_halo[b] || cfg.halo_width == 0) continue;
    const auto& e = blobs[b];
    const auto lo_r = static_cast<std::size_t>(std::max(0.0, std::floor(e.cy - e.reach)));
    const auto hi_r = std::min(n, static_cast<std::size_t>(std::ceil(e.cy + e.reach)) + 1);
    const auto lo_c = static_cast<std::size_t>(std::max(0.0, std::floor(e.cx - e.reach)));
    const auto hi_c = std::min(n, static_cast<std::size_t>(std::ceil(e.cx + e.reach)) + 1);
    for (std::size_t r = lo_r; r < hi_r; ++r) {
      for (std::size_t col = lo_c; col < hi_c; ++col) {
        if (s.structure_id(r, col) != 0) continue;
        for (const auto& [pr, pc] : blob_pixels[b]) {
          const double dy = static_cast<double>(r) - static_cast<double>(pr);
          const double dx = static_cast<double>(col) - static_cast<double>(pc);
          if (dy * dy + dx * dx <= hw2) {
            s.structure_id(r, col) = halo_region(blob_class[b]);
            break;
          }
        }
      }
    }
  }

  // Intensities.
  s.image = Field2D(n, n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      const double y = static_cast<double>(r);
      const double x = static_cast<double>(col);
      const std::int32_t region = s.structure_id(r, col);
      double v = 0.0;
      if (region == 0) {
        v = bg_level + 0.04 * std::sin(2.0 * std::numbers::pi * y / size + bg_phase_y) *
                           std::cos(2.0 * std::numbers::pi * x / size + bg_phase_x);
      } else {
        const std::size_t c = static_cast<std::size_t>((region - 1) / 2);
        const auto b = static_cast<std::size_t>(std::ranges::find(blob_class, c) - blob_class.begin());
        const double class_shift = cfg.n_classes > 1 ? 0.12 * static_cast<double>(c) / static_cast<double>(cfg.n_classes - 1) : 0.0;
        if (region % 2 == 1) {
          const auto& e = blobs[b];
          const double u = (x - e.cx) * std::cos(e.angle) + (y - e.cy) * std::sin(e.angle);
          v = 0.68 + class_shift + 0.18 * std::sin(2.0 * std::numbers::pi * blob_freq[b] * u);
        } else {
          v = 0.48 + class_shift;
        }
      }
      v += cfg.texture_noise_sigma * rng.normal();
      s.image(r, col) = to_f32(v);
    }
  }
  return s;
}

}  // namespace detail

/// Generates cfg.n_samples samples; sample i depends only on (seed, i).
inline Dataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.n_classes = cfg.n_classes;
  d.image_size = cfg.image_size;
  d.samples.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) d.samples.push_back(detail::generate_sample(cfg, i));
  return d;
}

/// Count of halo pixels in a sample (structure ids that are even and > 0).
inline std::size_t halo_pixel_count(const Sample& s) {
  return static_cast<std::size_t>(std::ranges::count_if(
      s.structure_id.values(), [](std::int32_t v) { return v > 0 && v % 2 == 0; }));
}

struct SplitResult {
  Dataset train, val, test;
};

/// Random partition by ratio. Sizes: val and test are rounded, train takes the rest.
inline SplitResult split_dataset(const Dataset& d, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios) wms::detail::require(r >= 0.0, "split_dataset: ratios must be non-negative");
  wms::detail::require(std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) <= 1e-9,
                  "split_dataset: ratios must sum to 1");
  const std::size_t n = d.size();
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
  if (n_val + n_test >= n || n_val == 0 || n_test == 0) {
    throw Error("split_dataset: ratios (" + std::to_string(ratios[0]) + "," + std::to_string(ratios[1]) + "," +
                std::to_string(ratios[2]) + ") give an empty split for " + std::to_string(n) + " samples");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(seed);
  shuffle(order, rng);

  SplitResult out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->n_classes = d.n_classes;
    part->image_size = d.image_size;
  }
  const std::size_t n_train = n - n_val - n_test;
  std::vector<std::size_t> idx_train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> idx_val(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::vector<std::size_t> idx_test(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  auto fill = [&](Dataset& part, std::vector<std::size_t>& idx, Split tag) {
    std::ranges::sort(idx);
    for (std::size_t i : idx) {
      part.samples.push_back(d.samples[i]);
      part.samples.back().split = tag;
    }
  };
  fill(out.train, idx_train, Split::train);
  fill(out.val, idx_val, Split::val);
  fill(out.test, idx_test, Split::test);
  return out;
}

/// Tags every sample of `d` with its split, in place, using split_dataset's partition.
inline void assign_splits(Dataset& d, std::array<double, 3> ratios, std::uint64_t seed) {
  const auto parts = split_dataset(d, ratios, seed);
  std::map<std::size_t, Split> tag;
  for (const Dataset* p : {&parts.train, &parts.val, &parts.test})
    for (const auto& s : p->samples) tag[s.id] = s.split;
  for (auto& s : d.samples) s.split = tag.at(s.id);
}

inline Dataset select_split(const Dataset& d, Split which) {
  Dataset out;
  out.n_classes = d.n_classes;
  out.image_size = d.image_size;
  for (const auto& s : d.samples)
    if (s.split == which) out.samples.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// On-disk layout:
//   images/<id>.wcf       float image
//   masks/<id>.pgm        class-id mask
//   structure/<id>.pgm    latent region ids (written when present)
//   manifest.csv          id,y_p_bits,subtype_ids,split

inline std::string encode_bits(const std::vector<std::uint8_t>& bits) {
  std::string s;
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

inline std::string encode_subtypes(const std::vector<int>& sub) {
  std::string s;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    if (i) s.push_back(';');
    s += sub[i] < 0 ? std::string("-") : std::to_string(sub[i]);
  }
  return s;
}

/// Writes the dataset and returns the manifest text.
inline std::string export_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::string manifest = "id,y_p_bits,subtype_ids,split\n";
  for (const auto& s : d.samples) {
    const std::string name = sample_name(s.id);
    io::write_wcf(dir / "images" / (name + ".wcf"), s.image);
    io::write_pgm(dir / "masks" / (name + ".pgm"), s.gt_mask);
    if (!s.structure_id.empty()) {
      LabelMap region(s.structure_id.height(), s.structure_id.width(), 0);
      for (std::size_t i = 0; i < region.size(); ++i) region[i] = static_cast<std::uint8_t>(s.structure_id[i]);
      io::write_pgm(dir / "structure" / (name + ".pgm"), region);
    }
    manifest += name + "," + encode_bits(s.y_p) + "," + encode_subtypes(s.latent_subtype) + "," +
                split_name(s.split) + "\n";
  }
  io::write_file(dir / "manifest.csv", manifest);
  return manifest;
}

inline Dataset import_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw Error("cannot open " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(in, line);
  if (line != "id,y_p_bits,subtype_ids,split") throw Error((dir / "manifest.csv").string() + ": bad header");
  Dataset d;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 4 || cols[0].size() < 2 || cols[0][0] != 's')
      throw Error((dir / "manifest.csv").string() + ": bad row '" + line + "'");
    Sample s;
    s.id = std::stoul(cols[0].substr(1));
    for (char ch : cols[1]) s.y_p.push_back(ch == '1' ? 1 : 0);
    std::stringstream st(cols[2]);
    while (std::getline(st, cell, ';')) s.latent_subtype.push_back(cell == "-" ? -1 : std::stoi(cell));
    s.split = parse_split(cols[3]);
    s.image = io::read_wcf(dir / "images" / (cols[0] + ".wcf"));
    s.gt_mask = io::read_pgm(dir / "masks" / (cols[0] + ".pgm"));
    const auto structure_path = dir / "structure" / (cols[0] + ".pgm");
    if (std::filesystem::exists(structure_path)) {
      const LabelMap region = io::read_pgm(structure_path);
      s.structure_id = RegionMap(region.height(), region.width(), 0);
      for (std::size_t i = 0; i < region.size(); ++i) s.structure_id[i] = region[i];
    }
    d.n_classes = s.y_p.size();
    d.image_size = s.image.height();
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace wms::synth
