#pragma once
// Slow, obviously-correct reference implementations shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "wms/core/field.hpp"
#include "wms/core/rng.hpp"
#include "wms/core/sparse.hpp"
#include "wms/eval/metrics.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense dense_identity(std::size_t n) {
  Dense m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline Dense matmul(const Dense& a, const Dense& b) {
  const std::size_t n = a.size();
  Dense out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (a[i][k] != 0.0)
        for (std::size_t j = 0; j < n; ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// Full n x n affinity over a working grid: exp(-|m_i - m_j|) for cells whose
// centre distance is within gamma, 1 on the diagonal.
inline Dense dense_affinity(const wms::Field2D& m, double gamma) {
  const std::size_t n = m.size();
  const std::size_t w = m.width();
  Dense a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dr = static_cast<double>(i / w) - static_cast<double>(j / w);
      const double dc = static_cast<double>(i % w) - static_cast<double>(j % w);
      if (dr * dr + dc * dc > gamma * gamma) continue;
      a[i][j] = i == j ? 1.0 : std::exp(-std::abs(m[i] - m[j]));
    }
  }
  return a;
}

inline Dense dense_transition(const Dense& a, double beta) {
  Dense t = a;
  for (auto& row : t) {
    double s = 0.0;
    for (double& v : row) {
      v = v > 0.0 ? std::pow(v, beta) : 0.0;
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return t;
}

// Explicit T^t, applied to vec(cam), then max-normalized.
inline wms::Field2D dense_walk(const Dense& t, const wms::Field2D& cam, std::size_t steps) {
  Dense p = dense_identity(t.size());
  for (std::size_t k = 0; k < steps; ++k) p = matmul(p, t);
  wms::Field2D out(cam.height(), cam.width(), 0.0);
  for (std::size_t i = 0; i < cam.size(); ++i)
    for (std::size_t j = 0; j < cam.size(); ++j) out[i] += p[i][j] * cam[j];
  return wms::max_normalize(out);
}

// Random symmetric sparse matrix with unit diagonal and off-diagonal weights
// in (0, 1].
inline wms::SparseMatrix random_symmetric(std::size_t n, double density, wms::SeededRng& rng) {
  std::vector<wms::Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, 1.0});
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!rng.bernoulli(density)) continue;
      const double w = 1.0 - rng.uniform();  // (0, 1]
      t.push_back({i, j, w});
      t.push_back({j, i, w});
    }
  }
  return wms::SparseMatrix(n, std::move(t));
}

inline wms::eval::Mask random_mask(std::size_t h, std::size_t w, double p, wms::SeededRng& rng) {
  wms::eval::Mask m(h, w, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(p) ? 1 : 0;
  if (std::ranges::none_of(m.values(), [](auto v) { return v != 0; })) m[rng.below(m.size())] = 1;
  return m;
}

// Boundary by definition: a foreground cell is interior only if all four
// neighbours exist and are foreground.
inline std::vector<std::pair<long, long>> boundary_cells(const wms::eval::Mask& m) {
  std::vector<std::pair<long, long>> out;
  const auto h = static_cast<long>(m.height());
  const auto w = static_cast<long>(m.width());
  auto fg = [&](long r, long c) { return r >= 0 && c >= 0 && r < h && c < w && m(r, c) != 0; };
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c)
      if (fg(r, c) && !(fg(r - 1, c) && fg(r + 1, c) && fg(r, c - 1) && fg(r, c + 1))) out.emplace_back(r, c);
  return out;
}

// For every boundary cell of `from`, the exhaustive minimum distance to the
// boundary of `to`.
inline std::vector<double> brute_directed(const wms::eval::Mask& from, const wms::eval::Mask& to) {
  const auto a = boundary_cells(from);
  const auto b = boundary_cells(to);
  std::vector<double> out;
  for (const auto& [r, c] : a) {
    long best = std::numeric_limits<long>::max();
    for (const auto& [r2, c2] : b) best = std::min(best, (r - r2) * (r - r2) + (c - c2) * (c - c2));
    out.push_back(std::sqrt(static_cast<double>(best)));
  }
  return out;
}

inline double brute_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double brute_assd(const wms::eval::Mask& a, const wms::eval::Mask& b) {
  return (brute_mean(brute_directed(a, b)) + brute_mean(brute_directed(b, a))) / 2.0;
}

inline double brute_hd95(const wms::eval::Mask& a, const wms::eval::Mask& b) {
  auto d = brute_directed(a, b);
  const auto e = brute_directed(b, a);
  d.insert(d.end(), e.begin(), e.end());
  std::ranges::sort(d);
  const double pos = 0.95 * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, d.size() - 1);
  return d[lo] + (d[hi] - d[lo]) * (pos - static_cast<double>(lo));
}

inline double brute_hausdorff(const wms::eval::Mask& a, const wms::eval::Mask& b) {
  const auto d = brute_directed(a, b);
  const auto e = brute_directed(b, a);
  return std::max(*std::ranges::max_element(d), *std::ranges::max_element(e));
}

// Minimum-SSE partition of 1-D points into k non-empty groups, by trying
// every labelling. Returned as a canonical group id per point (first
// occurrence order), so two partitions compare with ==.
inline std::vector<std::size_t> canonical(const std::vector<std::size_t>& labels) {
  std::vector<std::size_t> map(labels.size() + 64, SIZE_MAX), out;
  std::size_t next = 0;
  for (auto l : labels) {
    if (map[l] == SIZE_MAX) map[l] = next++;
    out.push_back(map[l]);
  }
  return out;
}

inline double partition_sse(const std::vector<double>& x, const std::vector<std::size_t>& lab, std::size_t k) {
  double sse = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (lab[i] == g) s += x[i], ++n;
    if (n == 0) return std::numeric_limits<double>::infinity();
    const double mu = s / static_cast<double>(n);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (lab[i] == g) sse += (x[i] - mu) * (x[i] - mu);
  }
  return sse;
}

inline std::vector<std::size_t> best_partition(const std::vector<double>& x, std::size_t k) {
  std::vector<std::size_t> lab(x.size(), 0), best;
  double best_sse = std::numeric_limits<double>::infinity();
  while (true) {
    const double s = partition_sse(x, lab, k);
    if (s < best_sse - 1e-12) {
      best_sse = s;
      best = lab;
    }
    std::size_t i = 0;
    while (i < lab.size() && ++lab[i] == k) lab[i++] = 0;
    if (i == lab.size()) break;
  }
  return canonical(best);
}

// Every canonical partition whose SSE ties the optimum.
inline std::set<std::vector<std::size_t>> optimal_partitions(const std::vector<double>& x, std::size_t k) {
  const auto best = best_partition(x, k);
  const double opt = partition_sse(x, best, k);
  std::set<std::vector<std::size_t>> out;
  std::vector<std::size_t> lab(x.size(), 0);
  while (true) {
    if (partition_sse(x, lab, k) <= opt + 1e-12) out.insert(canonical(lab));
    std::size_t i = 0;
    while (i < lab.size() && ++lab[i] == k) lab[i++] = 0;
    if (i == lab.size()) break;
  }
  return out;
}

}  // namespace oracle
