#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "wms/core/field.hpp"

namespace wms {

/// Sentinel for "no feature pixel anywhere".
inline constexpr std::int64_t kNoFeature = std::numeric_limits<std::int64_t>::max() / 4;

namespace detail {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), integer exact.
inline void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d,
                   std::vector<std::int64_t>& v, std::vector<double>& z) {
  const auto n = static_cast<std::int64_t>(f.size());
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] >= kNoFeature) continue;
    while (k >= 0) {
      const std::int64_t p = v[k];
      const double s = (static_cast<double>(f[q] + q * q) - static_cast<double>(f[p] + p * p)) /
                       (2.0 * static_cast<double>(q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -std::numeric_limits<double>::infinity()
                  : (static_cast<double>(f[q] + q * q) - static_cast<double>(f[v[k - 1]] + v[k - 1] * v[k - 1])) /
                        (2.0 * static_cast<double>(q - v[k - 1]));
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    for (std::int64_t q = 0; q < n; ++q) d[q] = kNoFeature;
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const std::int64_t dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance from every cell to the nearest cell where
/// `feature` is true. Cells with no feature anywhere get kNoFeature.
inline Grid<std::int64_t> squared_distance_transform(const Grid<std::uint8_t>& feature) {
  const std::size_t h = feature.height();
  const std::size_t w = feature.width();
  Grid<std::int64_t> out(h, w, kNoFeature);
  const std::size_t n = std::max(h, w);
  std::vector<std::int64_t> f(n), d(n), v(n);
  std::vector<double> z(n + 1);

  // Columns first: distance along rows of each column.
  for (std::size_t c = 0; c < w; ++c) {
    f.assign(h, 0);
    d.assign(h, 0);
    for (std::size_t r = 0; r < h; ++r) f[r] = feature(r, c) ? 0 : kNoFeature;
    detail::edt_1d(f, d, v, z);
    for (std::size_t r = 0; r < h; ++r) out(r, c) = d[r];
  }
  for (std::size_t r = 0; r < h; ++r) {
    f.assign(w, 0);
    d.assign(w, 0);
    for (std::size_t c = 0; c < w; ++c) f[c] = out(r, c);
    detail::edt_1d(f, d, v, z);
    for (std::size_t c = 0; c < w; ++c) out(r, c) = d[c];
  }
  return out;
}

}  // namespace wms
