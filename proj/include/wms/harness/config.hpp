#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wms/core/error.hpp"
#include "wms/core/io.hpp"
#include "wms/core/rng.hpp"
#include "wms/nn/tinynet.hpp"
#include "wms/pam/refine.hpp"
#include "wms/prompt/oracle.hpp"
#include "wms/sce/train.hpp"
#include "wms/synth/dataset.hpp"

namespace wms::harness {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct DataSection {
  synth::SynthConfig synth;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
};

struct SceSection {
  bool enabled = true;
  std::size_t k = 8;
  double lambda = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double peak_lr = 0.05;
  double warmup_fraction = 0.3;
  double start_div = 25.0;
  double end_div = 1e4;
  double momentum = 0.9;
  std::size_t feature_dim = 64;
  std::optional<std::uint64_t> cluster_seed;  // derived from the run seed when absent
  std::vector<nn::ConvSpec> encoder = {{8, 2}, {16, 2}, {16, 1}};
};

struct PamSection {
  bool enabled = true;
  pam::RefinementConfig refine;
};

struct EvalSection {
  synth::Split split = synth::Split::train;
  bool dump_maps = false;  // refined CAMs (WCF) and pseudo-labels (PGM) per sample
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "run";
  DataSection data;
  SceSection sce;
  prompt::OracleConfig oracle;
  PamSection pam;
  EvalSection eval;

  void validate() const;
};

// Per-stage seeds, all derived from the run seed.
struct StageSeeds {
  std::uint64_t data, split, features, cluster, init, order, oracle;
};

inline StageSeeds stage_seeds(const RunConfig& cfg) {
  const auto s = cfg.seed;
  return {mix_seed(s, 1), mix_seed(s, 2), mix_seed(s, 3), cfg.sce.cluster_seed.value_or(mix_seed(s, 4)),
          mix_seed(s, 5), mix_seed(s, 6), mix_seed(s, 7)};
}

inline synth::SynthConfig synth_config(const RunConfig& cfg) {
  auto sc = cfg.data.synth;
  sc.seed = stage_seeds(cfg).data;
  return sc;
}

inline nn::NetConfig net_config(const RunConfig& cfg) {
  nn::NetConfig n;
  n.image_size = cfg.data.synth.image_size;
  n.encoder = cfg.sce.encoder;
  n.n_classes = cfg.data.synth.n_classes;
  n.n_subclasses = cfg.sce.k;
  n.init_seed = stage_seeds(cfg).init;
  return n;
}

inline sce::TrainConfig train_config(const RunConfig& cfg) {
  sce::TrainConfig t;
  t.lambda = cfg.sce.enabled ? cfg.sce.lambda : 0.0;
  t.epochs = cfg.sce.epochs;
  t.batch_size = cfg.sce.batch_size;
  t.peak_lr = cfg.sce.peak_lr;
  t.warmup_fraction = cfg.sce.warmup_fraction;
  t.start_div = cfg.sce.start_div;
  t.end_div = cfg.sce.end_div;
  t.momentum = cfg.sce.momentum;
  t.seed = stage_seeds(cfg).order;
  t.cam_threshold = cfg.pam.refine.threshold;
  return t;
}

inline prompt::OracleConfig oracle_config(const RunConfig& cfg) {
  auto o = cfg.oracle;
  o.seed = stage_seeds(cfg).oracle;
  return o;
}

inline void RunConfig::validate() const {
  synth_config(*this).validate();
  double total = 0.0;
  for (double r : data.split) {
    wms::detail::require(r >= 0.0, "config: data.split ratios must be >= 0");
    total += r;
  }
  wms::detail::require(std::abs(total - 1.0) <= 1e-9, "config: data.split ratios must sum to 1");
  wms::detail::require(sce.k >= 1, "config: sce.k must be >= 1");
  net_config(*this).validate();
  train_config(*this).validate();
  nn::OneCycleSchedule{sce.peak_lr, 1, sce.warmup_fraction, sce.start_div, sce.end_div}.validate();
  wms::detail::require(sce.feature_dim >= 4 && sce.feature_dim % 2 == 0, "config: sce.feature_dim must be even and >= 4");
  oracle.validate();
  pam.refine.validate();
  wms::detail::require(pam.refine.grid <= data.synth.image_size, "config: pam.grid must be <= image_size");
  const auto n = net_config(*this);
  wms::detail::require(data.synth.image_size % n.feature_size() == 0,
                       "config: image_size must be a multiple of the feature grid size");
  wms::detail::require(eval.split != synth::Split::none, "config: eval.split must be train, val or test");
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: " + where() + " must be an object");
  }

  /// Throws on any key that was never asked for.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw Error("config: unknown key '" + prefix() + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw Error("expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw Error("expected a non-negative integer");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) throw Error("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw Error("expected a string");
      }
      out = it->template get<T>();
    } catch (const std::exception& e) {
      throw Error("config: key '" + prefix() + key + "': " + e.what());
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }

 private:
  std::string where() const { return path_.empty() ? "top level" : "'" + path_ + "'"; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  const auto& s = c.data.synth;
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.generic_string();
  j["data"] = {{"n_samples", s.n_samples},
               {"image_size", s.image_size},
               {"n_classes", s.n_classes},
               {"n_latent_subtypes", s.n_latent_subtypes},
               {"p_class_present", s.p_class_present},
               {"p_halo_given_target", s.p_halo_given_target},
               {"halo_width", s.halo_width},
               {"texture_noise_sigma", s.texture_noise_sigma},
               {"target_radius_frac", s.target_radius_frac},
               {"split", c.data.split}};
  Json enc = Json::array();
  for (const auto& l : c.sce.encoder) enc.push_back({{"channels", l.out_channels}, {"stride", l.stride}});
  j["sce"] = {{"enabled", c.sce.enabled},
              {"k", c.sce.k},
              {"lambda", c.sce.lambda},
              {"epochs", c.sce.epochs},
              {"batch_size", c.sce.batch_size},
              {"peak_lr", c.sce.peak_lr},
              {"warmup_fraction", c.sce.warmup_fraction},
              {"start_div", c.sce.start_div},
              {"end_div", c.sce.end_div},
              {"momentum", c.sce.momentum},
              {"feature_dim", c.sce.feature_dim},
              {"cluster_seed", c.sce.cluster_seed ? Json(*c.sce.cluster_seed) : Json(nullptr)},
              {"encoder", enc}};
  j["oracle"] = {{"kind", c.oracle.kind == prompt::OracleKind::synthetic ? "synthetic" : "external"},
                 {"boundary_noise_sigma", c.oracle.boundary_noise_sigma},
                 {"leakage_prob", c.oracle.leakage_prob},
                 {"background_radius", c.oracle.background_radius},
                 {"store_dir", c.oracle.store_dir.generic_string()}};
  const auto& r = c.pam.refine;
  j["pam"] = {{"enabled", c.pam.enabled}, {"grid", r.grid},   {"radius", r.radius},
              {"beta", r.beta},           {"steps", r.steps}, {"threshold", r.threshold}};
  j["eval"] = {{"split", synth::split_name(c.eval.split)}, {"dump_maps", c.eval.dump_maps}};
  return j;
}

/// Strict parse: every key must be known; omitted keys keep their defaults.
inline RunConfig from_json(const Json& j) {
  RunConfig c;
  {
    detail::Reader top(j, "");
    int version = -1;
    top.get("schema_version", version);
    if (version != kSchemaVersion) {
      throw Error("config: schema_version must be " + std::to_string(kSchemaVersion) +
                  (version < 0 ? " (missing)" : " (got " + std::to_string(version) + ")"));
    }
    top.get("seed", c.seed);
    std::string out = c.out_dir.generic_string();
    top.get("out_dir", out);
    c.out_dir = out;

    if (const Json* d = top.child("data")) {
      detail::Reader r(*d, "data");
      auto& s = c.data.synth;
      r.get("n_samples", s.n_samples);
      r.get("image_size", s.image_size);
      r.get("n_classes", s.n_classes);
      r.get("n_latent_subtypes", s.n_latent_subtypes);
      r.get("p_class_present", s.p_class_present);
      r.get("p_halo_given_target", s.p_halo_given_target);
      r.get("halo_width", s.halo_width);
      r.get("texture_noise_sigma", s.texture_noise_sigma);
      r.get("target_radius_frac", s.target_radius_frac);
      if (const Json* sp = r.child("split")) {
        if (!sp->is_array() || sp->size() != 3) throw Error("config: key 'data.split': expected three ratios");
        for (std::size_t i = 0; i < 3; ++i) {
          if (!(*sp)[i].is_number()) throw Error("config: key 'data.split': expected numbers");
          c.data.split[i] = (*sp)[i].get<double>();
        }
      }
      r.finish();
    }
    if (c.data.synth.n_classes > 1) c.sce.k = 4;  // multi-class default unless sce.k is given
    if (const Json* d = top.child("sce")) {
      detail::Reader r(*d, "sce");
      auto& s = c.sce;
      r.get("enabled", s.enabled);
      r.get("k", s.k);
      r.get("lambda", s.lambda);
      r.get("epochs", s.epochs);
      r.get("batch_size", s.batch_size);
      r.get("peak_lr", s.peak_lr);
      r.get("warmup_fraction", s.warmup_fraction);
      r.get("start_div", s.start_div);
      r.get("end_div", s.end_div);
      r.get("momentum", s.momentum);
      r.get("feature_dim", s.feature_dim);
      if (const Json* cs = r.child("cluster_seed"); cs && !cs->is_null()) {
        if (!cs->is_number_unsigned()) throw Error("config: key 'sce.cluster_seed': expected a non-negative integer");
        s.cluster_seed = cs->get<std::uint64_t>();
      }
      if (const Json* enc = r.child("encoder")) {
        if (!enc->is_array()) throw Error("config: key 'sce.encoder': expected an array");
        s.encoder.clear();
        for (std::size_t i = 0; i < enc->size(); ++i) {
          detail::Reader l((*enc)[i], "sce.encoder[" + std::to_string(i) + "]");
          nn::ConvSpec spec;
          l.get("channels", spec.out_channels);
          l.get("stride", spec.stride);
          l.finish();
          s.encoder.push_back(spec);
        }
      }
      r.finish();
    }
    if (const Json* d = top.child("oracle")) {
      detail::Reader r(*d, "oracle");
      std::string kind = "synthetic";
      r.get("kind", kind);
      if (kind == "synthetic") c.oracle.kind = prompt::OracleKind::synthetic;
      else if (kind == "external") c.oracle.kind = prompt::OracleKind::external;
      else throw Error("config: key 'oracle.kind': expected 'synthetic' or 'external'");
      r.get("boundary_noise_sigma", c.oracle.boundary_noise_sigma);
      r.get("leakage_prob", c.oracle.leakage_prob);
      r.get("background_radius", c.oracle.background_radius);
      std::string store = c.oracle.store_dir.generic_string();
      r.get("store_dir", store);
      c.oracle.store_dir = store;
      r.finish();
    }
    if (const Json* d = top.child("pam")) {
      detail::Reader r(*d, "pam");
      auto& p = c.pam.refine;
      r.get("enabled", c.pam.enabled);
      r.get("grid", p.grid);
      r.get("radius", p.radius);
      r.get("beta", p.beta);
      r.get("steps", p.steps);
      r.get("threshold", p.threshold);
      r.finish();
    }
    if (const Json* d = top.child("eval")) {
      detail::Reader r(*d, "eval");
      std::string split = synth::split_name(c.eval.split);
      r.get("split", split);
      try {
        c.eval.split = synth::parse_split(split);
      } catch (const Error&) {
        throw Error("config: key 'eval.split': expected train, val or test");
      }
      r.get("dump_maps", c.eval.dump_maps);
      r.finish();
    }
    top.finish();
  }
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& text, const std::string& what = "config") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(what + ": invalid JSON: " + e.what());
  }
  return from_json(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.string());
}

inline std::string dump_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace wms::harness
