#pragma once

#include <cmath>
#include <limits>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/sparse.hpp"
#include "wms/prompt/oracle.hpp"

namespace wms::pam {

/// Hyperparameters of the affinity random walk.
struct RefinementConfig {
  std::size_t grid = 8;       // prompts per side
  double radius = 5.0;        // neighbourhood radius in working-grid cells
  double beta = 4.0;          // Hadamard exponent on affinities
  std::size_t steps = 4;      // random-walk iterations
  double threshold = 0.25;    // pseudo-label threshold on max-normalized CAMs

  void validate() const {
    wms::detail::require(grid >= 1, "RefinementConfig: grid must be >= 1");
    wms::detail::require(radius >= 1.0, "RefinementConfig: radius must be >= 1");
    wms::detail::require(beta >= 1.0, "RefinementConfig: beta must be >= 1");
    wms::detail::require(threshold > 0.0 && threshold < 1.0, "RefinementConfig: threshold must be in (0, 1)");
  }
};

/// Sum of prompt masks, min-max normalized, then block-averaged to the working grid.
/// Binary masks sum exactly, so the result does not depend on mask order.
inline Field2D aggregate_affinity(std::span<const prompt::PromptMask> masks, std::size_t work_h,
                                  std::size_t work_w) {
  wms::detail::require(!masks.empty(), "aggregate_affinity: no masks");
  Field2D sum(masks[0].mask.height(), masks[0].mask.width(), 0.0);
  for (const auto& m : masks) {
    require_same_shape(sum, m.mask, "aggregate_affinity");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m.mask[i];
  }
  return downsample_avg(minmax_normalize(sum), work_h, work_w);
}

/// Queries the oracle on the g x g prompt grid and aggregates the masks.
inline Field2D affinity_map(const prompt::PromptOracle& oracle, const synth::Sample& sample, std::size_t grid,
                            std::size_t work_h, std::size_t work_w) {
  const auto prompts = prompt::grid_prompts(sample.image.height(), grid, sample.id);
  std::vector<prompt::PromptMask> masks;
  masks.reserve(prompts.size());
  for (const auto& p : prompts) masks.push_back(oracle.mask(sample, p));
  return aggregate_affinity(masks, work_h, work_w);
}

namespace detail {

/// Symmetric local kernel: a_ij = kernel(value_i, value_j) for cells within
/// Euclidean centre distance <= radius, a_ii = 1.
template <typename Kernel>
SparseMatrix local_affinity(const Field2D& values, double radius, Kernel&& kernel) {
  const auto h = static_cast<long>(values.height());
  const auto w = static_cast<long>(values.width());
  const auto reach = static_cast<long>(std::floor(radius));
  const double r2 = radius * radius;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(h * w * (2 * reach + 1) * (2 * reach + 1)));
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      const auto i = static_cast<std::size_t>(r * w + c);
      for (long dr = -reach; dr <= reach; ++dr) {
        for (long dc = -reach; dc <= reach; ++dc) {
          const long nr = r + dr;
          const long nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          if (static_cast<double>(dr * dr + dc * dc) > r2) continue;
          const auto j = static_cast<std::size_t>(nr * w + nc);
          const double a = i == j ? 1.0 : kernel(values[i], values[j]);
          t.push_back({i, j, a});
        }
      }
    }
  }
  return SparseMatrix(values.size(), std::move(t));
}

}  // namespace detail

/// a_ij = exp(-|M_i - M_j|) within the radius; unit diagonal; symmetric.
inline SparseMatrix pairwise_affinity(const Field2D& affinity, double radius) {
  wms::detail::require(radius >= 1.0, "pairwise_affinity: radius must be >= 1");
  return detail::local_affinity(affinity, radius, [](double a, double b) { return std::exp(-std::abs(a - b)); });
}

/// Baseline without prompts: a_ij = exp(-|I_i - I_j| / bandwidth) over the
/// image block-averaged to the working grid.
inline SparseMatrix intensity_affinity_baseline(const Field2D& image, std::size_t work_h, std::size_t work_w,
                                                double radius, double bandwidth) {
  wms::detail::require(bandwidth > 0.0, "intensity_affinity_baseline: bandwidth must be > 0");
  wms::detail::require(radius >= 1.0, "intensity_affinity_baseline: radius must be >= 1");
  const Field2D small = downsample_avg(image, work_h, work_w);
  return detail::local_affinity(small, radius, [bandwidth](double a, double b) {
    return std::max(std::exp(-std::abs(a - b) / bandwidth), std::numeric_limits<double>::min());
  });
}

/// T = D^-1 A^(o beta), D_ii = sum_j A_ij^beta.
inline SparseMatrix transition_matrix(const SparseMatrix& a, double beta) {
  const SparseMatrix powered = hadamard_power(a, beta);
  std::vector<double> inv(powered.dimension());
  for (std::size_t r = 0; r < powered.dimension(); ++r) {
    const double s = powered.row_sum(r);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvariantError("transition_matrix: row " + std::to_string(r) + " has degree " + std::to_string(s));
    }
    inv[r] = 1.0 / s;
  }
  return powered.scale_rows(inv);
}

/// t applications of a row-stochastic T to vec(cam), without re-normalization.
///
/// Each step evaluates (Tv)_i as v_i + sum_j T_ij (v_j - v_i), which equals
/// sum_j T_ij v_j when row i sums to one and makes constant vectors exact
/// fixed points regardless of rounding in the row sums.
inline Field2D propagate(const SparseMatrix& t, const Field2D& cam, std::size_t steps) {
  if (t.dimension() != cam.size()) {
    throw Error("random_walk: transition dimension " + std::to_string(t.dimension()) + " != CAM cells " +
                std::to_string(cam.size()));
  }
  std::vector<double> v(cam.values().begin(), cam.values().end());
  std::vector<double> next(v.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t r = 0; r < v.size(); ++r) {
      const auto cols = t.row_cols(r);
      const auto w = t.row_weights(r);
      double delta = 0.0;
      for (std::size_t e = 0; e < cols.size(); ++e) delta += w[e] * (v[cols[e]] - v[r]);
      next[r] = v[r] + delta;
    }
    v.swap(next);
  }
  return Field2D(cam.height(), cam.width(), std::move(v));
}

/// Random-walk refinement followed by max re-normalization (zero maps stay zero).
/// Zero steps return the input unchanged.
inline Field2D random_walk(const SparseMatrix& t, const Field2D& cam, std::size_t steps) {
  if (t.dimension() != cam.size()) {
    throw Error("random_walk: transition dimension " + std::to_string(t.dimension()) + " != CAM cells " +
                std::to_string(cam.size()));
  }
  if (steps == 0) return cam;
  return max_normalize(propagate(t, cam, steps));
}

/// Per-cell argmax over classes if the winning value reaches the threshold,
/// else background. cams[c] scores class id c+1; ties go to the lowest id.
inline LabelMap pseudo_label(std::span<const Field2D> cams, double threshold) {
  wms::detail::require(!cams.empty(), "pseudo_label: no CAMs");
  wms::detail::require(threshold > 0.0 && threshold < 1.0, "pseudo_label: threshold must be in (0, 1)");
  LabelMap out(cams[0].height(), cams[0].width(), 0);
  for (const auto& cam : cams) require_same_shape(cams[0], cam, "pseudo_label");
  for (std::size_t i = 0; i < out.size(); ++i) {
    double best = -1.0;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < cams.size(); ++c) {
      if (cams[c][i] > best) {
        best = cams[c][i];
        best_c = c;
      }
    }
    if (best >= threshold) out[i] = static_cast<std::uint8_t>(best_c + 1);
  }
  return out;
}

/// Full refinement of one sample's CAMs given its affinity map.
inline std::vector<Field2D> refine_cams(std::span<const Field2D> cams, const Field2D& affinity,
                                        const RefinementConfig& cfg) {
  cfg.validate();
  const SparseMatrix t = transition_matrix(pairwise_affinity(affinity, cfg.radius), cfg.beta);
  std::vector<Field2D> out;
  out.reserve(cams.size());
  for (const auto& cam : cams) out.push_back(random_walk(t, cam, cfg.steps));
  return out;
}

}  // namespace wms::pam
