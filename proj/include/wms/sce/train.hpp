#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/rng.hpp"
#include "wms/eval/metrics.hpp"
#include "wms/nn/checkpoint.hpp"
#include "wms/nn/loss.hpp"
#include "wms/nn/optim.hpp"
#include "wms/nn/tinynet.hpp"
#include "wms/pam/refine.hpp"
#include "wms/synth/dataset.hpp"

namespace wms::sce {

// ---------------------------------------------------------------------------
// CAMs

/// Class activation map at feature resolution with provenance.
struct Cam {
  Field2D map;  // non-negative, max 1 unless all zero
  std::size_t class_id = 0;
  std::size_t sample_id = 0;
  std::string checkpoint_id;
};

/// FNV-1a over the serialized checkpoint, as 16 hex digits.
inline std::string checkpoint_id(const nn::TinyNetParams& p) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : nn::encode_checkpoint(p)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Raw (pre-ReLU, un-normalized) head_p response map of class c.
inline Field2D raw_cam(const nn::TinyNetParams& p, const nn::DoubleParams& w, const nn::ForwardResult& fr,
                       std::size_t c) {
  return nn::response_map(fr.features, w[p.head_p_weight()], w[p.head_p_bias()], c);
}

inline Field2D cam_from_raw(const Field2D& raw) {
  Field2D relu = raw;
  for (double& v : relu.values()) v = v > 0.0 ? v : 0.0;
  return max_normalize(relu);
}

/// ReLU(head_p[c] applied to F), max-normalized. head_s never contributes.
inline std::vector<Field2D> compute_cams(const nn::TinyNetParams& p, const Field2D& image) {
  const auto w = nn::widen(p);
  const auto fr = nn::forward(p.config, w, image);
  std::vector<Field2D> out;
  for (std::size_t c = 0; c < p.config.n_classes; ++c) out.push_back(cam_from_raw(raw_cam(p, w, fr, c)));
  return out;
}

inline Cam compute_cam(const nn::TinyNetParams& p, const synth::Sample& s, std::size_t c) {
  wms::detail::require(c < p.config.n_classes, "compute_cam: class index out of range");
  return {compute_cams(p, s.image)[c], c, s.id, checkpoint_id(p)};
}

/// CAMs for the classes in y_p; absent classes get all-zero maps.
inline std::vector<Field2D> labelled_cams(const nn::TinyNetParams& p, const synth::Sample& s) {
  auto cams = compute_cams(p, s.image);
  for (std::size_t c = 0; c < cams.size(); ++c)
    if (!s.y_p[c]) cams[c] = Field2D(cams[c].height(), cams[c].width(), 0.0);
  return cams;
}

/// Mean Dice of thresholded CAM pseudo-labels against ground truth over the
/// (sample, class) pairs with y_p = 1.
inline double cam_dice(const nn::TinyNetParams& p, const synth::Dataset& d, double threshold) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : d.samples) {
    const auto cams = labelled_cams(p, s);
    const LabelMap low = pam::pseudo_label(cams, threshold);
    const LabelMap label = upsample_nearest(low, s.gt_mask.height(), s.gt_mask.width());
    for (std::size_t c = 0; c < d.n_classes; ++c) {
      if (!s.y_p[c]) continue;
      const auto id = static_cast<std::uint8_t>(c + 1);
      sum += eval::dice(eval::class_mask(label, id), eval::class_mask(s.gt_mask, id));
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lambda = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double peak_lr = 1e-4;
  double warmup_fraction = 0.3;
  double start_div = 25.0;
  double end_div = 1e4;
  double momentum = 0.9;
  std::uint64_t seed = 0;           // batch order
  bool freeze_subclass_head = false;
  std::size_t eval_every = 0;       // steps between log rows; 0 = once per epoch
  double cam_threshold = 0.25;

  void validate() const {
    wms::detail::require(lambda >= 0.0, "TrainConfig: lambda must be >= 0");
    wms::detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    wms::detail::require(peak_lr > 0.0, "TrainConfig: peak_lr must be > 0");
    wms::detail::require(momentum >= 0.0 && momentum < 1.0, "TrainConfig: momentum must be in [0, 1)");
  }
};

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;      // optimizer steps taken so far
  double loss_p = 0.0;       // mean training L_p over the steps since the previous row
  double loss_s = 0.0;       // likewise for L_s (0 without sub-class labels)
  double cam_dice = 0.0;     // validation CAM Dice after the last step
};

struct TrainResult {
  nn::TinyNetParams params;
  std::vector<TrainLogRow> log;
};

/// Thrown when the loss or an update goes non-finite; carries the last
/// parameters that produced a finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, nn::TinyNetParams last_good)
      : Error(what), last_good_(std::move(last_good)) {}
  const nn::TinyNetParams& last_good() const { return last_good_; }

 private:
  nn::TinyNetParams last_good_;
};

inline std::vector<nn::Example> make_examples(const synth::Dataset& d, bool with_subclass) {
  std::vector<nn::Example> out;
  out.reserve(d.size());
  for (const auto& s : d.samples) {
    if (with_subclass && s.y_s.empty())
      throw Error("train_sce: sample " + synth::sample_name(s.id) + " has no sub-class labels");
    out.push_back({&s.image, s.y_p, with_subclass ? std::span<const std::uint8_t>(s.y_s) : std::span<const std::uint8_t>{}});
  }
  return out;
}

/// Joint optimization of encoder, head_p and head_s with SGD and a one-cycle
/// learning rate. Sub-class labels are required when lambda > 0; when every
/// training sample carries them L_s is logged even at lambda = 0.
inline TrainResult train_sce(const synth::Dataset& train, const synth::Dataset& val, const nn::NetConfig& net,
                             const TrainConfig& cfg) {
  cfg.validate();
  TrainResult res{nn::init_params(net), {}};
  if (cfg.epochs == 0 || train.samples.empty()) return res;

  const bool have_s = std::ranges::all_of(train.samples, [](const auto& s) { return !s.y_s.empty(); });
  const auto examples = make_examples(train, cfg.lambda > 0.0 || have_s);
  const std::size_t steps_per_epoch = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
  nn::OneCycleSchedule schedule{cfg.peak_lr, steps_per_epoch * cfg.epochs, cfg.warmup_fraction, cfg.start_div,
                                cfg.end_div};
  schedule.validate();
  nn::Sgd opt(res.params, cfg.momentum);
  const nn::JointLossOptions loss_opt{cfg.lambda, cfg.freeze_subclass_head};

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(mix_seed(cfg.seed, 0xB47C));
  std::size_t step = 0;
  double sum_p = 0.0, sum_s = 0.0;
  std::size_t since = 0;
  auto log_row = [&](std::size_t epoch) {
    TrainLogRow row{epoch, step, sum_p / static_cast<double>(since), sum_s / static_cast<double>(since), 0.0};
    if (!val.samples.empty()) row.cam_dice = cam_dice(res.params, val, cfg.cam_threshold);
    res.log.push_back(row);
    sum_p = sum_s = 0.0;
    since = 0;
  };
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      std::vector<nn::Example> batch;
      for (std::size_t i = b * cfg.batch_size; i < std::min(order.size(), (b + 1) * cfg.batch_size); ++i)
        batch.push_back(examples[order[i]]);
      const auto lr = nn::joint_loss(res.params, batch, loss_opt);
      if (!std::isfinite(lr.loss)) {
        throw TrainingDiverged("train_sce: non-finite loss at step " + std::to_string(step), res.params);
      }
      nn::TinyNetParams before = res.params;
      try {
        opt.step(res.params, lr.grads, schedule, step, cfg.freeze_subclass_head);
      } catch (const Error& e) {
        throw TrainingDiverged(std::string("train_sce: ") + e.what(), std::move(before));
      }
      if (!res.params.all_finite()) {
        throw TrainingDiverged("train_sce: non-finite parameters after step " + std::to_string(step), std::move(before));
      }
      ++step;
      sum_p += lr.loss_p;
      sum_s += lr.loss_s;
      ++since;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) log_row(epoch + 1);
    }
    if (cfg.eval_every == 0) log_row(epoch + 1);
  }
  return res;
}

/// Training-dynamics probe: the encoder and head_p are optimized on L_p alone
/// while head_s stays frozen at its initialization; L_s is still measured.
/// One row every eval_every steps (default: four rows per epoch).
inline std::vector<TrainLogRow> run_sce_probe(const synth::Dataset& train, const synth::Dataset& val,
                                              const nn::NetConfig& net, TrainConfig cfg) {
  cfg.lambda = 0.0;
  cfg.freeze_subclass_head = true;
  if (!std::ranges::all_of(train.samples, [](const auto& s) { return !s.y_s.empty(); }))
    throw Error("run_sce_probe: every training sample needs sub-class labels");
  if (cfg.eval_every == 0) {
    const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    cfg.eval_every = std::max<std::size_t>(1, steps_per_epoch / 4);
  }
  return train_sce(train, val, net, cfg).log;
}

inline std::string encode_probe_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = "step,loss_p,loss_s,cam_dice\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", r.step, r.loss_p, r.loss_s, r.cam_dice);
    out += buf;
  }
  return out;
}

}  // namespace wms::sce
