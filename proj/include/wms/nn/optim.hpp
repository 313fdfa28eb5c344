#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/nn/tinynet.hpp"

namespace wms::nn {

/// Cosine one-cycle learning rate.
///
/// Warm-up over the first round(warmup_fraction * total_steps) steps from
/// peak/start_div up to peak (reached exactly at the end of warm-up), then
/// cosine annealing down to peak/end_div at the last step.
struct OneCycleSchedule {
  double peak_lr = 1e-4;
  std::size_t total_steps = 1;
  double warmup_fraction = 0.3;
  double start_div = 25.0;
  double end_div = 1e4;

  void validate() const {
    wms::detail::require(peak_lr > 0.0, "OneCycleSchedule: peak_lr must be > 0");
    wms::detail::require(total_steps >= 1, "OneCycleSchedule: total_steps must be >= 1");
    wms::detail::require(warmup_fraction >= 0.0 && warmup_fraction <= 1.0,
                         "OneCycleSchedule: warmup_fraction must be in [0, 1]");
    wms::detail::require(start_div >= 1.0 && end_div >= 1.0, "OneCycleSchedule: divisors must be >= 1");
  }

  std::size_t warmup_steps() const {
    if (total_steps <= 1) return 0;
    const auto w = static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps - 1)));
    return std::clamp<std::size_t>(w, 1, total_steps - 1);
  }

  /// A single-step schedule runs at peak_lr.
  double lr(std::size_t step) const {
    if (total_steps <= 1) return peak_lr;
    const std::size_t warm = warmup_steps();
    const double lo = peak_lr / start_div;
    const double end = peak_lr / end_div;
    if (step <= warm) {
      const double t = static_cast<double>(step) / static_cast<double>(warm);
      return lo + (peak_lr - lo) * (1.0 - std::cos(std::numbers::pi * t)) / 2.0;
    }
    const std::size_t span = total_steps - 1 - warm;
    const double t = span == 0 ? 1.0 : static_cast<double>(std::min(step, total_steps - 1) - warm) / static_cast<double>(span);
    return end + (peak_lr - end) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
  }
};

/// SGD with classical momentum: v <- mu v + g; p <- p - lr v.
class Sgd {
 public:
  explicit Sgd(const TinyNetParams& params, double momentum = 0.9) : momentum_(momentum) {
    wms::detail::require(momentum >= 0.0 && momentum < 1.0, "Sgd: momentum must be in [0, 1)");
    for (const auto& p : params.params) velocity_.emplace_back(p.data.size(), 0.0);
  }

  /// Applies one update. Parameters listed as frozen are skipped entirely.
  void step(TinyNetParams& params, const DoubleParams& grads, const OneCycleSchedule& schedule, std::size_t step,
            bool freeze_subclass_head = false) {
    if (step >= schedule.total_steps) {
      throw Error("sgd_step: step " + std::to_string(step) + " >= total_steps " + std::to_string(schedule.total_steps));
    }
    for (std::size_t t = 0; t < grads.size(); ++t)
      for (double g : grads[t])
        if (!std::isfinite(g)) throw Error("sgd_step: non-finite gradient in " + params.params[t].name);
    const double lr = schedule.lr(step);
    for (std::size_t t = 0; t < params.params.size(); ++t) {
      if (freeze_subclass_head && params.is_subclass_head(t)) continue;
      auto& data = params.params[t].data;
      auto& vel = velocity_[t];
      for (std::size_t i = 0; i < data.size(); ++i) {
        vel[i] = momentum_ * vel[i] + grads[t][i];
        data[i] = static_cast<float>(static_cast<double>(data[i]) - lr * vel[i]);
      }
    }
    if (!params.all_finite()) throw Error("sgd_step: parameters became non-finite");
  }

 private:
  double momentum_;
  DoubleParams velocity_;
};

}  // namespace wms::nn
