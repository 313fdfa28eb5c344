// Command-line front end for the weakly supervised segmentation pipeline.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wms/harness/config.hpp"
#include "wms/harness/experiments.hpp"
#include "wms/harness/pipeline.hpp"

namespace {

using namespace wms;
using namespace wms::harness;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
};

RunConfig effective_config(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out_dir = g.out;
  c.validate();
  return c;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto end = std::min(s.find(',', pos), s.size());
    const std::string item = s.substr(pos, end - pos);
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, double>) out.push_back(std::stod(item, &used));
      else out.push_back(static_cast<T>(std::stoull(item, &used)));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(std::string("bad ") + what + " list '" + s + "'");
    }
    pos = end + 1;
  }
  return out;
}

void print_metrics(const RunReport& r) {
  if (!r.metrics) return;
  const auto& m = *r.metrics;
  std::printf("pairs %zu  dsc %.4f  jaccard %.4f  assd %.3f  hd95 %.3f  (surface metrics over %zu, skipped %zu)\n",
              m.count, m.dsc, m.jaccard, m.assd, m.hd95, m.scored, m.skipped_ids.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised segmentation: sub-class exploration and prompt affinity refinement"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Run seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  PipelineInputs in;
  auto add_inputs = [&](CLI::App* sub, bool clusters, bool checkpoint) {
    sub->add_option("--data", in.data_dir, "Dataset directory written by gen")->check(CLI::ExistingDirectory);
    if (clusters) sub->add_option("--clusters", in.clusters, "Sub-class assignment CSV")->check(CLI::ExistingFile);
    if (checkpoint) sub->add_option("--checkpoint", in.checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  };

  struct StageCmd {
    const char* name;
    const char* help;
    Stage stage;
  };
  const std::vector<StageCmd> stages = {
      {"gen", "Generate the synthetic dataset", Stage::gen},
      {"cluster", "Mint sub-class labels by per-class k-means", Stage::cluster},
      {"train", "Train the classifier (joint loss when SCE is on)", Stage::train},
      {"cam", "Write class activation maps for the evaluation split", Stage::cam},
      {"refine", "Refine CAMs by prompt-affinity random walk and write pseudo-labels", Stage::refine},
      {"eval", "Run the full pipeline and score pseudo-labels", Stage::eval},
  };
  std::optional<Stage> chosen;
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    if (s.stage != Stage::gen) add_inputs(sub, s.stage != Stage::cluster, s.stage != Stage::cluster && s.stage != Stage::train);
    sub->callback([&chosen, st = s.stage] { chosen = st; });
  }

  std::string seeds_text = "0,1,2,3,4";
  auto* ablate = app.add_subcommand("ablate", "SCE x PAM ablation grid over seeds");
  ablate->add_option("--seeds", seeds_text, "Comma-separated seeds (>= 3)");

  std::string axis_text, values_text, sweep_seeds;
  auto* sweep = app.add_subcommand("sweep", "Single-axis hyperparameter sweep");
  sweep->add_option("--axis", axis_text, "K, beta, t, gamma or theta")->required();
  sweep->add_option("--values", values_text, "Comma-separated values (>= 2)")->required();
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds (default: the run seed)");

  auto* probe = app.add_subcommand("probe", "Frozen sub-class head training probe");

  std::string mask_dir;
  auto* exportm = app.add_subcommand("export-masks", "Write all grid-prompt masks in the external store layout");
  exportm->add_option("--dir", mask_dir, "Store directory (default <out>/masks)");

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = in_stage("config", [&] { return effective_config(g); });
    if (chosen) {
      stage = stage_name(*chosen);
      const auto rep = run_pipeline(cfg, *chosen, in, nullptr, g.jobs);
      print_metrics(rep);
      std::printf("wrote %s\n", rep.dir.string().c_str());
    } else if (ablate->parsed()) {
      const auto seeds = parse_list<std::uint64_t>(seeds_text, "seed");
      const auto t = run_ablation(cfg, seeds, g.jobs);
      std::fputs(encode_ablation_summary(t).c_str(), stdout);
      std::fputs(ablation_orderings(t).c_str(), stdout);
    } else if (sweep->parsed()) {
      const auto axis = parse_axis(axis_text);
      const auto values = parse_list<double>(values_text, "value");
      const auto seeds = sweep_seeds.empty() ? std::vector<std::uint64_t>{cfg.seed}
                                             : parse_list<std::uint64_t>(sweep_seeds, "seed");
      const auto t = run_sweep(cfg, axis, values, seeds, g.jobs);
      std::fputs(encode_sweep_summary(t).c_str(), stdout);
    } else if (probe->parsed()) {
      const auto rows = run_probe(cfg, g.jobs);
      std::printf("%zu probe rows; wrote %s\n", rows.size(), (cfg.out_dir / "probe.csv").string().c_str());
    } else if (exportm->parsed()) {
      const fs::path dir = mask_dir.empty() ? cfg.out_dir / "masks" : fs::path(mask_dir);
      export_prompt_masks(cfg, dir, g.jobs);
      std::printf("wrote %s\n", (dir / "manifest.csv").string().c_str());
    } else if (show->parsed()) {
      std::fputs(dump_config(cfg).c_str(), stdout);
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "wms: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "wms: stage %s: %s\n", stage.c_str(), e.what());
    return 1;
  }
  return 0;
}
