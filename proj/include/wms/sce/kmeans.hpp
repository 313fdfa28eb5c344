#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/rng.hpp"

namespace wms::sce {

using Point = std::vector<double>;

struct KMeansResult {
  std::vector<std::size_t> assignment;  // cluster per point
  std::vector<Point> centroids;
  std::vector<double> sse_history;      // within-cluster SSE after every assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Within-cluster sum of squared distances for a given assignment.
inline double within_cluster_sse(std::span<const Point> points, std::span<const std::size_t> assignment,
                                 std::span<const Point> centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += squared_distance(points[i], centroids[assignment[i]]);
  return s;
}

/// k-means++ seeding: first centre uniform, the rest by D^2 sampling.
inline std::vector<Point> kmeanspp_seed(std::span<const Point> points, std::size_t k, SeededRng& rng) {
  std::vector<Point> centres;
  centres.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centres[0]);
  while (centres.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(points.size());  // all points coincide with a centre
    }
    centres.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i)
      d2[i] = std::min(d2[i], squared_distance(points[i], centres.back()));
  }
  return centres;
}

/// Lloyd's algorithm from k-means++ seeds. Stops at an assignment fixpoint
/// or after max_iterations. Ties go to the lowest centroid index. An empty
/// cluster is re-seeded at the point farthest from its former centroid
/// (lowest index on ties). Throws if the SSE ever increases.
namespace detail {

// One k-means++ seeding followed by Lloyd iterations.
inline KMeansResult lloyd(std::span<const Point> points, std::size_t k, std::uint64_t seed,
                          std::size_t max_iterations) {
  const std::size_t dim = points[0].size();
  SeededRng rng(seed);
  KMeansResult res;
  res.centroids = kmeanspp_seed(points, k, rng);
  res.assignment.assign(points.size(), k);  // k = "unassigned"

  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    const double sse = within_cluster_sse(points, res.assignment, res.centroids);
    if (!res.sse_history.empty() && sse > res.sse_history.back() * (1.0 + 1e-12) + 1e-12) {
      throw InvariantError("kmeans: SSE increased from " + std::to_string(res.sse_history.back()) + " to " +
                           std::to_string(sse));
    }
    res.sse_history.push_back(sse);
    res.iterations = it + 1;
    if (!changed && it > 0) {
      res.converged = true;
      break;
    }

    // Update step.
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[res.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t d = 0; d < dim; ++d) res.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = squared_distance(points[i], res.centroids[c]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      res.centroids[c] = points[far];
    }
  }
  // Report the SSE of the returned centroids.
  if (!res.converged) {
    const double sse = within_cluster_sse(points, res.assignment, res.centroids);
    if (sse <= res.sse_history.back()) res.sse_history.push_back(sse);
  }
  return res;
}

}  // namespace detail

/// Best of `restarts` seeded runs by final SSE (earliest wins ties). A single
/// Lloyd run can stop in a local optimum even on four 1-D points.
inline KMeansResult kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed,
                           std::size_t max_iterations = 100, std::size_t restarts = 10) {
  wms::detail::require(k >= 1, "kmeans: K must be >= 1");
  wms::detail::require(restarts >= 1, "kmeans: restarts must be >= 1");
  if (points.size() < k) {
    throw Error("kmeans: " + std::to_string(points.size()) + " points cannot form " + std::to_string(k) +
                " clusters; lower K for this class");
  }
  const std::size_t dim = points[0].size();
  for (const auto& p : points) wms::detail::require(p.size() == dim, "kmeans: inconsistent point dimensions");

  KMeansResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    auto res = detail::lloyd(points, k, r == 0 ? seed : mix_seed(seed, r), max_iterations);
    if (r == 0 || res.sse_history.back() < best.sse_history.back()) best = std::move(res);
  }
  return best;
}

}  // namespace wms::sce
