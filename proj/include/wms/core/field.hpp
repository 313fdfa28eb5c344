#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wms/core/error.hpp"

namespace wms {

/// Dense row-major 2D grid. Cell (r, c) lives at index r * width + c; this
/// is also the vectorization order used by every matrix operation.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), values_(height * width, fill) {
    detail::require(height >= 1 && width >= 1, "Grid: height and width must be >= 1");
  }

  Grid(std::size_t height, std::size_t width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    detail::require(height >= 1 && width >= 1, "Grid: height and width must be >= 1");
    detail::require(values_.size() == height * width,
                    "Grid: value count " + std::to_string(values_.size()) + " != " +
                        std::to_string(height) + "x" + std::to_string(width));
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return values_[r * width_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * width_ + c]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  const std::vector<T>& vec() const { return values_; }

  bool same_shape(const Grid& o) const { return height_ == o.height_ && width_ == o.width_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> values_;
};

using Field2D = Grid<double>;
/// Per-pixel class ids (0 = background). PGM-compatible.
using LabelMap = Grid<std::uint8_t>;
/// Per-pixel latent region ids.
using RegionMap = Grid<std::int32_t>;

inline bool all_finite(const Field2D& f) {
  return std::ranges::all_of(f.values(), [](double v) { return std::isfinite(v); });
}

inline void require_same_shape(const auto& a, const auto& b, const char* who) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(std::string(who) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                std::to_string(b.width()));
  }
}

/// (f - min) / (max - min). A range below 1e-12 yields the all-zero field.
inline Field2D minmax_normalize(const Field2D& f) {
  const auto [lo_it, hi_it] = std::ranges::minmax_element(f.values());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  Field2D out(f.height(), f.width(), 0.0);
  if (!(range >= 1e-12)) return out;
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = (f[i] - lo) / range;
  return out;
}

/// Divide by the maximum when it is positive; otherwise return zeros.
/// Used for CAMs, which are non-negative.
inline Field2D max_normalize(const Field2D& f) {
  const double hi = *std::ranges::max_element(f.values());
  Field2D out(f.height(), f.width(), 0.0);
  if (!(hi > 0.0)) return out;
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] / hi;
  return out;
}

/// Block-mean pooling. Output shape must divide the input shape.
inline Field2D downsample_avg(const Field2D& f, std::size_t h2, std::size_t w2) {
  if (h2 == 0 || w2 == 0 || f.height() % h2 != 0 || f.width() % w2 != 0) {
    throw Error("downsample_avg: " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                " is not divisible into " + std::to_string(h2) + "x" + std::to_string(w2));
  }
  const std::size_t bh = f.height() / h2;
  const std::size_t bw = f.width() / w2;
  if (bh == 1 && bw == 1) return f;
  Field2D out(h2, w2, 0.0);
  const double inv = 1.0 / static_cast<double>(bh * bw);
  for (std::size_t r = 0; r < h2; ++r) {
    for (std::size_t c = 0; c < w2; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < bh; ++i)
        for (std::size_t j = 0; j < bw; ++j) s += f(r * bh + i, c * bw + j);
      out(r, c) = s * inv;
    }
  }
  return out;
}

/// Nearest-neighbour upsampling by integer factors.
template <typename T>
Grid<T> upsample_nearest(const Grid<T>& g, std::size_t h2, std::size_t w2) {
  if (h2 % g.height() != 0 || w2 % g.width() != 0) {
    throw Error("upsample_nearest: target shape must be a multiple of the source shape");
  }
  const std::size_t fh = h2 / g.height();
  const std::size_t fw = w2 / g.width();
  Grid<T> out(h2, w2);
  for (std::size_t r = 0; r < h2; ++r)
    for (std::size_t c = 0; c < w2; ++c) out(r, c) = g(r / fh, c / fw);
  return out;
}

}  // namespace wms
