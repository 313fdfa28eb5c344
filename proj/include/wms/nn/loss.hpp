#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/nn/tinynet.hpp"

namespace wms::nn {

/// Mean over labels of -[y log s(z) + (1-y) log(1 - s(z))], evaluated as
/// max(z,0) - z*y + log1p(exp(-|z|)).
inline double bce_multilabel(std::span<const double> logits, std::span<const std::uint8_t> targets) {
  if (logits.size() != targets.size()) {
    throw Error("bce_multilabel: " + std::to_string(logits.size()) + " logits vs " + std::to_string(targets.size()) +
                " targets");
  }
  wms::detail::require(!logits.empty(), "bce_multilabel: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (targets[i] > 1) throw Error("bce_multilabel: targets must be 0 or 1");
    const double z = logits[i];
    const double y = targets[i];
    s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return s / static_cast<double>(logits.size());
}

/// d bce / d logits.
inline std::vector<double> bce_multilabel_grad(std::span<const double> logits, std::span<const std::uint8_t> targets) {
  std::vector<double> g(logits.size());
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    g[i] = (sig - static_cast<double>(targets[i])) * inv;
  }
  return g;
}

/// One labelled training image. y_s may be empty when the sub-class loss is off.
struct Example {
  const Field2D* image = nullptr;
  std::span<const std::uint8_t> y_p;
  std::span<const std::uint8_t> y_s;
};

struct JointLossOptions {
  double lambda = 0.5;
  /// Leave head_s gradients at zero (its parameters are then never updated).
  bool freeze_subclass_head = false;
};

struct LossResult {
  double loss = 0.0;    // L_p + lambda * L_s, batch mean
  double loss_p = 0.0;
  double loss_s = 0.0;  // reported whenever y_s is available, even if lambda == 0
  DoubleParams grads;
};

/// Batch-mean joint loss and its gradient with respect to every parameter.
inline LossResult joint_loss(const NetConfig& cfg, const DoubleParams& w, std::span<const Example> batch,
                             const JointLossOptions& opt) {
  wms::detail::require(!batch.empty(), "joint_loss: empty batch");
  wms::detail::require(opt.lambda >= 0.0, "joint_loss: lambda must be >= 0");
  const std::size_t n_s = cfg.n_classes * cfg.n_subclasses;
  LossResult res;
  res.grads.reserve(w.size());
  for (const auto& t : w) res.grads.emplace_back(t.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  bool have_s = true;
  for (const auto& ex : batch) {
    if (ex.y_p.size() != cfg.n_classes) throw Error("joint_loss: y_p has wrong length");
    if (ex.y_s.empty()) {
      if (opt.lambda > 0.0) throw Error("joint_loss: sample without sub-class labels but lambda > 0");
      have_s = false;
    } else if (ex.y_s.size() != n_s) {
      throw Error("joint_loss: y_s has length " + std::to_string(ex.y_s.size()) + ", expected " + std::to_string(n_s));
    }
  }
  const std::vector<double> no_grad_s(n_s, 0.0);
  for (const auto& ex : batch) {
    const ForwardResult fr = forward(cfg, w, *ex.image);
    const double lp = bce_multilabel(fr.logits_p, ex.y_p);
    auto gp = bce_multilabel_grad(fr.logits_p, ex.y_p);
    for (double& g : gp) g *= inv_b;
    res.loss_p += lp * inv_b;
    std::vector<double> gs = no_grad_s;
    if (have_s) {
      const double ls = bce_multilabel(fr.logits_s, ex.y_s);
      res.loss_s += ls * inv_b;
      if (opt.lambda > 0.0) {
        gs = bce_multilabel_grad(fr.logits_s, ex.y_s);
        for (double& g : gs) g *= opt.lambda * inv_b;
      }
    }
    backward(cfg, w, fr, gp, gs, res.grads, !opt.freeze_subclass_head);
  }
  res.loss = res.loss_p + opt.lambda * (have_s ? res.loss_s : 0.0);
  return res;
}

inline LossResult joint_loss(const TinyNetParams& p, std::span<const Example> batch, const JointLossOptions& opt) {
  return joint_loss(p.config, widen(p), batch, opt);
}

}  // namespace wms::nn
