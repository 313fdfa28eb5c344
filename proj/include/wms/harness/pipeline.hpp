#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/io.hpp"
#include "wms/eval/metrics.hpp"
#include "wms/harness/config.hpp"
#include "wms/harness/parallel.hpp"
#include "wms/nn/checkpoint.hpp"
#include "wms/pam/refine.hpp"
#include "wms/prompt/oracle.hpp"
#include "wms/sce/subclass.hpp"
#include "wms/sce/train.hpp"
#include "wms/synth/dataset.hpp"

namespace wms::harness {

namespace fs = std::filesystem;

enum class Stage { gen, cluster, train, cam, refine, eval };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::gen: return "gen";
    case Stage::cluster: return "cluster";
    case Stage::train: return "train";
    case Stage::cam: return "cam";
    case Stage::refine: return "refine";
    case Stage::eval: return "eval";
  }
  return "?";
}

/// Any failure inside a pipeline stage, tagged with that stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

/// Artifacts that replace a stage instead of recomputing it.
struct PipelineInputs {
  fs::path data_dir;    // dataset written by `gen`
  fs::path clusters;    // sub-class assignment CSV
  fs::path checkpoint;  // trained network
};

/// Intermediate results shared between runs in one process. Keys are built
/// from every config field that influences the value.
struct RunCache {
  Memo<synth::Dataset> data;
  Memo<sce::SubClassAssignment> clusters;
  Memo<sce::TrainResult> models;
  Memo<std::vector<Field2D>> affinities;
};

struct PairScore {
  std::size_t sample_id = 0;
  std::size_t class_id = 0;  // 1-based label id
  double pre_dice = 0.0;
  double post_dice = 0.0;
};

struct RunReport {
  fs::path dir;
  Stage reached = Stage::gen;
  std::vector<sce::TrainLogRow> train_log;
  std::vector<eval::SampleMetrics> samples;
  std::optional<eval::MetricReport> metrics;
  std::vector<PairScore> refine_scores;
};

// ---------------------------------------------------------------------------
// CSV helpers

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string encode_train_log_csv(const std::vector<sce::TrainLogRow>& rows) {
  std::string out = "epoch,step,loss_p,loss_s,cam_dice\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + fmt(r.loss_p) + "," + fmt(r.loss_s) + "," +
           fmt(r.cam_dice) + "\n";
  return out;
}

inline std::string encode_metrics_csv(const std::vector<eval::SampleMetrics>& rows) {
  std::string out = "sample_id,class,dsc,jaccard,assd,hd95,skipped\n";
  for (const auto& m : rows) {
    out += synth::sample_name(m.sample_id) + "," + std::to_string(m.class_id) + "," + fmt(m.dsc) + "," +
           fmt(m.jaccard) + "," + (m.assd ? fmt(*m.assd) : "NA") + "," + (m.hd95 ? fmt(*m.hd95) : "NA") + "," +
           (m.skipped() ? m.empty_side : "no") + "\n";
  }
  return out;
}

inline std::string encode_refine_csv(const std::vector<PairScore>& rows) {
  std::string out = "sample_id,class,pre_dice,post_dice\n";
  for (const auto& r : rows)
    out += synth::sample_name(r.sample_id) + "," + std::to_string(r.class_id) + "," + fmt(r.pre_dice) + "," +
           fmt(r.post_dice) + "\n";
  return out;
}

inline Json summary_json(const eval::MetricReport& m) {
  Json skipped = Json::array();
  for (auto id : m.skipped_ids) skipped.push_back(synth::sample_name(id));
  return {{"dsc", m.dsc},         {"jaccard", m.jaccard}, {"assd", m.assd}, {"hd95", m.hd95},
          {"pairs", m.count},     {"scored", m.scored},   {"skipped", skipped}};
}

// ---------------------------------------------------------------------------
// Stage building blocks

namespace detail {

inline std::string data_key(const RunConfig& c) {
  const auto j = to_json(c);
  return Json{{"seed", c.seed}, {"data", j["data"]}}.dump();
}

inline std::string cluster_key(const RunConfig& c) {
  const auto s = stage_seeds(c);
  return data_key(c) + Json{{"k", c.sce.k}, {"dim", c.sce.feature_dim}, {"fs", s.features}, {"cs", s.cluster}}.dump();
}

inline std::string train_key(const RunConfig& c) {
  auto sce = to_json(c)["sce"];
  sce.erase("cluster_seed");
  if (!c.sce.enabled) sce.erase("lambda");
  return (c.sce.enabled ? cluster_key(c) : data_key(c)) + sce.dump() +
         Json{{"theta", c.pam.refine.threshold}}.dump();
}

inline std::string affinity_key(const RunConfig& c) {
  const auto j = to_json(c);
  return data_key(c) + j["oracle"].dump() +
         Json{{"grid", c.pam.refine.grid}, {"split", synth::split_name(c.eval.split)}}.dump();
}

inline synth::Dataset make_dataset(const RunConfig& c) {
  auto d = synth::generate_dataset(synth_config(c));
  synth::assign_splits(d, c.data.split, stage_seeds(c).split);
  return d;
}

inline sce::ClusterOptions cluster_options(const RunConfig& c) {
  const auto s = stage_seeds(c);
  return {c.sce.k, s.features, s.cluster, c.sce.feature_dim};
}

inline void check_architecture(const nn::TinyNetParams& p, const nn::NetConfig& want, const std::string& what) {
  const auto& got = p.config;
  if (got.image_size != want.image_size || got.encoder != want.encoder || got.n_classes != want.n_classes ||
      got.n_subclasses != want.n_subclasses)
    throw Error(what + ": checkpoint architecture does not match the config");
}

}  // namespace detail

/// Pseudo-label of one sample at image resolution.
inline LabelMap pseudo_label_image(std::span<const Field2D> cams, double threshold, std::size_t size) {
  return upsample_nearest(pam::pseudo_label(cams, threshold), size, size);
}

/// gen -> cluster -> train -> cam -> refine -> eval, stopping after `until`.
/// Writes config.json first, then each stage's artifacts as it completes;
/// a failing stage raises StageError and leaves earlier artifacts in place.
inline RunReport run_pipeline(const RunConfig& cfg, Stage until = Stage::eval, const PipelineInputs& in = {},
                              RunCache* shared = nullptr, std::size_t jobs = 1) {
  RunCache local;
  RunCache& cache = shared ? *shared : local;
  RunReport rep;
  rep.dir = cfg.out_dir;
  in_stage("config", [&] {
    cfg.validate();
    io::write_file(rep.dir / "config.json", dump_config(cfg));
  });

  // gen
  const auto data = in_stage("gen", [&] {
    if (!in.data_dir.empty()) {
      auto d = synth::import_dataset(in.data_dir);
      if (std::ranges::all_of(d.samples, [](const auto& s) { return s.split == synth::Split::none; }))
        synth::assign_splits(d, cfg.data.split, stage_seeds(cfg).split);
      return std::make_shared<const synth::Dataset>(std::move(d));
    }
    return cache.data.get(detail::data_key(cfg), [&] { return detail::make_dataset(cfg); });
  });
  if (until == Stage::gen) {
    in_stage("gen", [&] { synth::export_dataset(*data, rep.dir / "data"); });
    return rep;
  }
  const auto train_set = synth::select_split(*data, synth::Split::train);
  const auto val_set = synth::select_split(*data, synth::Split::val);
  rep.reached = Stage::gen;

  // cluster
  std::shared_ptr<const sce::SubClassAssignment> assignment;
  const bool need_clusters = cfg.sce.enabled && in.checkpoint.empty();
  if (need_clusters || until == Stage::cluster) {
    assignment = in_stage("cluster", [&] {
      if (!in.clusters.empty()) {
        auto a = sce::read_assignment(in.clusters);
        if (a.k != cfg.sce.k)
          throw Error(in.clusters.string() + ": K=" + std::to_string(a.k) + " but config has K=" + std::to_string(cfg.sce.k));
        return std::make_shared<const sce::SubClassAssignment>(std::move(a));
      }
      return cache.clusters.get(detail::cluster_key(cfg),
                                [&] { return sce::cluster_subclasses(train_set, detail::cluster_options(cfg)); });
    });
    in_stage("cluster", [&] { sce::write_assignment(rep.dir / "clusters.csv", *assignment); });
    rep.reached = Stage::cluster;
  }
  if (until == Stage::cluster) return rep;

  // train
  const auto model = in_stage("train", [&] {
    const auto net = net_config(cfg);
    if (!in.checkpoint.empty()) {
      auto p = nn::load_checkpoint(in.checkpoint);
      detail::check_architecture(p, net, in.checkpoint.string());
      return std::make_shared<const sce::TrainResult>(sce::TrainResult{std::move(p), {}});
    }
    const std::string key = detail::train_key(cfg) + (in.clusters.empty() ? "" : "@" + in.clusters.string());
    return cache.models.get(key, [&] {
      auto labelled = train_set;
      if (cfg.sce.enabled) sce::build_subclass_labels(labelled, *assignment);
      try {
        return sce::train_sce(labelled, val_set, net, train_config(cfg));
      } catch (const sce::TrainingDiverged& e) {
        nn::save_checkpoint(rep.dir / "checkpoint_last_good.wck", e.last_good());
        throw;
      }
    });
  });
  rep.train_log = model->log;
  in_stage("train", [&] {
    nn::save_checkpoint(rep.dir / "checkpoint.wck", model->params);
    io::write_file(rep.dir / "train_log.csv", encode_train_log_csv(model->log));
  });
  rep.reached = Stage::train;
  if (until == Stage::train) return rep;

  // cam
  const auto eval_set = synth::select_split(*data, cfg.eval.split);
  const std::size_t n = eval_set.size();
  std::vector<std::vector<Field2D>> cams(n);
  in_stage("cam", [&] {
    if (n == 0) throw Error(std::string("evaluation split '") + synth::split_name(cfg.eval.split) + "' is empty");
    parallel_for(n, jobs, [&](std::size_t i) { cams[i] = sce::labelled_cams(model->params, eval_set.samples[i]); });
    if (until == Stage::cam || cfg.eval.dump_maps) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cams[i].size(); ++c)
          io::write_wcf(rep.dir / "cams" / (synth::sample_name(eval_set.samples[i].id) + "_c" + std::to_string(c + 1) + ".wcf"),
                        cams[i][c]);
    }
  });
  rep.reached = Stage::cam;
  if (until == Stage::cam) return rep;

  // refine
  const auto& rc = cfg.pam.refine;
  const std::size_t size = cfg.data.synth.image_size;
  std::vector<std::vector<Field2D>> refined = cams;
  if (cfg.pam.enabled) {
    in_stage("refine", [&] {
      const std::size_t fh = cams[0][0].height();
      const std::size_t fw = cams[0][0].width();
      auto compute = [&] {
        const auto oracle = prompt::make_oracle(oracle_config(cfg));
        std::vector<Field2D> aff(n);
        parallel_for(n, jobs, [&](std::size_t i) { aff[i] = pam::affinity_map(*oracle, eval_set.samples[i], rc.grid, fh, fw); });
        return aff;
      };
      // External stores are read fresh every time.
      const auto aff = cfg.oracle.kind == prompt::OracleKind::synthetic
                           ? cache.affinities.get(detail::affinity_key(cfg), compute)
                           : std::make_shared<const std::vector<Field2D>>(compute());
      parallel_for(n, jobs, [&](std::size_t i) { refined[i] = pam::refine_cams(cams[i], (*aff)[i], rc); });

      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = eval_set.samples[i];
        const auto pre = pseudo_label_image(cams[i], rc.threshold, size);
        const auto post = pseudo_label_image(refined[i], rc.threshold, size);
        for (std::size_t c = 0; c < s.y_p.size(); ++c) {
          if (!s.y_p[c]) continue;
          const auto id = static_cast<std::uint8_t>(c + 1);
          const auto gt = eval::class_mask(s.gt_mask, id);
          rep.refine_scores.push_back(
              {s.id, c + 1, eval::dice(eval::class_mask(pre, id), gt), eval::dice(eval::class_mask(post, id), gt)});
        }
      }
      io::write_file(rep.dir / "refine.csv", encode_refine_csv(rep.refine_scores));
    });
  }
  in_stage("refine", [&] {
    if (until == Stage::refine || cfg.eval.dump_maps) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto name = synth::sample_name(eval_set.samples[i].id);
        for (std::size_t c = 0; c < refined[i].size(); ++c)
          io::write_wcf(rep.dir / "refined" / (name + "_c" + std::to_string(c + 1) + ".wcf"), refined[i][c]);
        io::write_pgm(rep.dir / "labels" / (name + ".pgm"), pseudo_label_image(refined[i], rc.threshold, size));
      }
    }
  });
  rep.reached = Stage::refine;
  if (until == Stage::refine) return rep;

  // eval: every (sample, class) pair with the class present.
  in_stage("eval", [&] {
    std::vector<std::vector<eval::SampleMetrics>> per(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      const auto& s = eval_set.samples[i];
      const auto label = pseudo_label_image(refined[i], rc.threshold, size);
      for (std::size_t c = 0; c < s.y_p.size(); ++c) {
        if (!s.y_p[c]) continue;
        const auto id = static_cast<std::uint8_t>(c + 1);
        per[i].push_back(eval::evaluate_pair(eval::class_mask(label, id), eval::class_mask(s.gt_mask, id), s.id, c + 1));
      }
    });
    for (auto& v : per) rep.samples.insert(rep.samples.end(), v.begin(), v.end());
    io::write_file(rep.dir / "metrics.csv", encode_metrics_csv(rep.samples));
    rep.metrics = eval::aggregate(rep.samples);
    io::write_file(rep.dir / "summary.json", summary_json(*rep.metrics).dump(2) + "\n");
  });
  rep.reached = Stage::eval;
  return rep;
}

// ---------------------------------------------------------------------------
// Probe and prompt-mask export

/// Frozen-head probe on the training split; writes probe.csv.
inline std::vector<sce::TrainLogRow> run_probe(const RunConfig& cfg, std::size_t jobs = 1) {
  (void)jobs;
  in_stage("config", [&] {
    cfg.validate();
    io::write_file(cfg.out_dir / "config.json", dump_config(cfg));
  });
  const auto data = in_stage("gen", [&] { return detail::make_dataset(cfg); });
  auto train_set = synth::select_split(data, synth::Split::train);
  const auto val_set = synth::select_split(data, synth::Split::val);
  in_stage("cluster", [&] {
    const auto a = sce::cluster_subclasses(train_set, detail::cluster_options(cfg));
    sce::write_assignment(cfg.out_dir / "clusters.csv", a);
    sce::build_subclass_labels(train_set, a);
  });
  return in_stage("train", [&] {
    auto rows = sce::run_sce_probe(train_set, val_set, net_config(cfg), train_config(cfg));
    io::write_file(cfg.out_dir / "probe.csv", sce::encode_probe_csv(rows));
    return rows;
  });
}

/// Writes every grid-prompt mask of every sample in the external store
/// layout and returns the manifest (also written as manifest.csv).
inline std::string export_prompt_masks(const RunConfig& cfg, const fs::path& dir, std::size_t jobs = 1) {
  if (cfg.oracle.kind != prompt::OracleKind::synthetic)
    throw StageError("export-masks", "the synthetic oracle must be configured");
  const auto data = in_stage("gen", [&] { return detail::make_dataset(cfg); });
  return in_stage("export-masks", [&] {
    const auto oracle = prompt::make_oracle(oracle_config(cfg));
    const std::size_t g = cfg.pam.refine.grid;
    std::vector<std::string> lines(data.size());
    parallel_for(data.size(), jobs, [&](std::size_t i) {
      const auto& s = data.samples[i];
      for (const auto& p : prompt::grid_prompts(s.image.height(), g, s.id)) {
        const auto path = prompt::mask_store_path(dir, p);
        io::write_pgm(path, io::quantize_unit(oracle->mask(s, p).mask));
        lines[i] += synth::sample_name(s.id) + "," + std::to_string(p.grid_index) + "," + std::to_string(p.row) + "," +
                    std::to_string(p.col) + "," + fs::relative(path, dir).generic_string() + "\n";
      }
    });
    std::string manifest = "sample_id,grid_index,row,col,path\n";
    for (const auto& l : lines) manifest += l;
    io::write_file(dir / "manifest.csv", manifest);
    return manifest;
  });
}

}  // namespace wms::harness
