#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wms/core/distance.hpp"
#include "wms/core/error.hpp"
#include "wms/core/field.hpp"

namespace wms::eval {

using Mask = Grid<std::uint8_t>;  // nonzero = foreground

/// Surface metrics are undefined when either mask is empty.
class EmptyMaskError : public Error {
 public:
  EmptyMaskError(std::string side, const std::string& what) : Error(what), side_(std::move(side)) {}
  const std::string& side() const { return side_; }

 private:
  std::string side_;  // "pred", "gt" or "both"
};

/// Binary mask of cells equal to `class_id`.
inline Mask class_mask(const LabelMap& labels, std::uint8_t class_id) {
  Mask m(labels.height(), labels.width(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == class_id ? 1 : 0;
  return m;
}

namespace detail {

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

inline Overlap overlap(const Mask& pred, const Mask& gt, const char* who) {
  require_same_shape(pred, gt, who);
  Overlap o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    o.a += p;
    o.b += g;
    o.both += p && g;
  }
  return o;
}

}  // namespace detail

/// 2|A n B| / (|A| + |B|); 1 when both are empty.
inline double dice(const Mask& pred, const Mask& gt) {
  const auto o = detail::overlap(pred, gt, "dice");
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

/// |A n B| / |A u B|; 1 when both are empty.
inline double jaccard(const Mask& pred, const Mask& gt) {
  const auto o = detail::overlap(pred, gt, "jaccard");
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

/// Foreground cells with at least one 4-neighbour outside the mask (the
/// image border counts as outside).
inline Mask boundary(const Mask& m) {
  const std::size_t h = m.height();
  const std::size_t w = m.width();
  Mask out(h, w, 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (!m(r, c)) continue;
      const bool interior = r > 0 && r + 1 < h && c > 0 && c + 1 < w && m(r - 1, c) && m(r + 1, c) &&
                            m(r, c - 1) && m(r, c + 1);
      out(r, c) = interior ? 0 : 1;
    }
  }
  return out;
}

/// Distances from each boundary cell of `from` (row-major order) to the
/// nearest boundary cell of `to`.
inline std::vector<double> directed_surface_distances(const Mask& from, const Mask& to) {
  const Mask bf = boundary(from);
  const auto dt = squared_distance_transform(boundary(to));
  std::vector<double> out;
  for (std::size_t i = 0; i < bf.size(); ++i)
    if (bf[i]) out.push_back(std::sqrt(static_cast<double>(dt[i])));
  return out;
}

namespace detail {

inline void require_nonempty(const Mask& pred, const Mask& gt, const char* who) {
  require_same_shape(pred, gt, who);
  const bool pe = std::ranges::none_of(pred.values(), [](auto v) { return v != 0; });
  const bool ge = std::ranges::none_of(gt.values(), [](auto v) { return v != 0; });
  if (pe || ge) {
    const std::string side = pe && ge ? "both" : (pe ? "pred" : "gt");
    throw EmptyMaskError(side, std::string(who) + ": empty " + side + " mask");
  }
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Linear-interpolated percentile of an ascending-sorted sample, p in [0,1].
inline double sorted_percentile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

/// Mean of the two directed mean boundary distances, in pixels.
inline double assd(const Mask& pred, const Mask& gt) {
  detail::require_nonempty(pred, gt, "assd");
  const auto ab = directed_surface_distances(pred, gt);
  const auto ba = directed_surface_distances(gt, pred);
  return (detail::mean(ab) + detail::mean(ba)) / 2.0;
}

/// 95th percentile of the pooled boundary distances in both directions.
inline double hd95(const Mask& pred, const Mask& gt) {
  detail::require_nonempty(pred, gt, "hd95");
  auto pooled = directed_surface_distances(pred, gt);
  const auto ba = directed_surface_distances(gt, pred);
  pooled.insert(pooled.end(), ba.begin(), ba.end());
  std::ranges::sort(pooled);
  return sorted_percentile(pooled, 0.95);
}

struct SampleMetrics {
  std::size_t sample_id = 0;
  std::size_t class_id = 0;
  double dsc = 0.0;
  double jaccard = 0.0;
  std::optional<double> assd;  // empty when skipped by the empty-mask policy
  std::optional<double> hd95;
  std::string empty_side;      // "pred", "gt" or "both" when skipped
  bool skipped() const { return !assd.has_value(); }
};

inline SampleMetrics evaluate_pair(const Mask& pred, const Mask& gt, std::size_t sample_id, std::size_t class_id) {
  SampleMetrics m;
  m.sample_id = sample_id;
  m.class_id = class_id;
  m.dsc = dice(pred, gt);
  m.jaccard = jaccard(pred, gt);
  try {
    m.assd = assd(pred, gt);
    m.hd95 = hd95(pred, gt);
  } catch (const EmptyMaskError& e) {
    m.assd.reset();
    m.hd95.reset();
    m.empty_side = e.side();
  }
  return m;
}

struct MetricReport {
  double dsc = 0.0;
  double jaccard = 0.0;
  double assd = 0.0;
  double hd95 = 0.0;
  std::size_t count = 0;    // samples averaged for dsc / jaccard
  std::size_t scored = 0;   // samples averaged for assd / hd95
  std::vector<std::size_t> skipped_ids;
};

/// Unweighted means. Similarity metrics average every report; surface
/// metrics average the non-skipped ones.
inline MetricReport aggregate(const std::vector<SampleMetrics>& reports) {
  wms::detail::require(!reports.empty(), "aggregate: no reports");
  MetricReport out;
  for (const auto& r : reports) {
    out.dsc += r.dsc;
    out.jaccard += r.jaccard;
    ++out.count;
    if (r.skipped()) {
      out.skipped_ids.push_back(r.sample_id);
    } else {
      out.assd += *r.assd;
      out.hd95 += *r.hd95;
      ++out.scored;
    }
  }
  if (out.scored == 0) throw Error("aggregate: no scoreable samples (all skipped by the empty-mask policy)");
  out.dsc /= static_cast<double>(out.count);
  out.jaccard /= static_cast<double>(out.count);
  out.assd /= static_cast<double>(out.scored);
  out.hd95 /= static_cast<double>(out.scored);
  return out;
}

}  // namespace wms::eval
