#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wms/core/rng.hpp"
#include "wms/nn/loss.hpp"

namespace wms::nn {

struct GradCheckOptions {
  double lambda = 0.5;
  double epsilon = 1e-5;
  std::size_t coordinates = 256;
  std::uint64_t seed = 0;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Gradient provider; defaults to joint_loss. Tests swap in a corrupted one.
using GradFn = std::function<DoubleParams(const NetConfig&, const DoubleParams&, std::span<const Example>,
                                          const JointLossOptions&)>;

inline DoubleParams analytic_grads(const NetConfig& cfg, const DoubleParams& w, std::span<const Example> batch,
                                   const JointLossOptions& opt) {
  return joint_loss(cfg, w, batch, opt).grads;
}

/// Central differences on a seeded random subset of coordinates. With
/// lambda == 0 the head_s coordinates are excluded (their gradient is zero
/// by construction and the loss does not depend on them).
inline GradCheckResult grad_check(const TinyNetParams& params, std::span<const Example> batch,
                                  const GradCheckOptions& opt, const GradFn& grad_fn = analytic_grads) {
  wms::detail::require(opt.epsilon >= 1e-6 && opt.epsilon <= 1e-3, "grad_check: epsilon must be in [1e-6, 1e-3]");
  const NetConfig& cfg = params.config;
  DoubleParams w = widen(params);
  const JointLossOptions loss_opt{opt.lambda, false};
  const DoubleParams analytic = grad_fn(cfg, w, batch, loss_opt);

  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (opt.lambda == 0.0 && params.is_subclass_head(t)) continue;
    for (std::size_t i = 0; i < w[t].size(); ++i) pool.emplace_back(t, i);
  }
  SeededRng rng(opt.seed);
  shuffle(pool, rng);
  pool.resize(std::min(pool.size(), opt.coordinates));

  GradCheckResult res;
  for (const auto& [t, i] : pool) {
    const double orig = w[t][i];
    w[t][i] = orig + opt.epsilon;
    const double up = joint_loss(cfg, w, batch, loss_opt).loss;
    w[t][i] = orig - opt.epsilon;
    const double down = joint_loss(cfg, w, batch, loss_opt).loss;
    w[t][i] = orig;
    const double numeric = (up - down) / (2.0 * opt.epsilon);
    const double a = analytic[t][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
    res.max_relative_error = std::max(res.max_relative_error, std::abs(a - numeric) / denom);
    ++res.checked;
  }
  return res;
}

}  // namespace wms::nn
