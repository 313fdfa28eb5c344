// Acceptance checks. One PASS/FAIL line per criterion; tolerances and
// budgets are fixed here. Usage: wms_acceptance [out_dir] [--quick]
// --quick skips the three benchmark-scale experiments.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "wms/core/io.hpp"
#include "wms/harness/experiments.hpp"
#include "wms/harness/pipeline.hpp"
#include "wms/nn/gradcheck.hpp"
#include "wms/pam/refine.hpp"
#include "wms/sce/kmeans.hpp"

using namespace wms;
using namespace wms::harness;
namespace fs = std::filesystem;

namespace {

constexpr double kRowSumTol = 1e-9;
constexpr double kDenseTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradCoords = 200;
constexpr double kMinGain = 5.0;       // Dice points, full over baseline
constexpr double kMaxSeedSpread = 2.0; // Dice points

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double budget_s, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " [over budget " + std::to_string(static_cast<int>(budget_s)) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

Field2D random_field(std::size_t h, std::size_t w, SeededRng& rng) {
  Field2D f(h, w, 0.0);
  for (double& v : f.values()) v = rng.uniform();
  return f;
}

std::string num(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome stochasticity() {
  SeededRng rng(101);
  double worst = 0.0;
  std::size_t rows = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_symmetric(2 + rng.below(80), rng.uniform(0.02, 0.5), rng);
    for (double beta : {1.0, 2.0, 4.0, 8.0}) {
      const auto t = pam::transition_matrix(a, beta);
      for (std::size_t r = 0; r < t.dimension(); ++r, ++rows) worst = std::max(worst, std::abs(t.row_sum(r) - 1.0));
    }
  }
  return {worst <= kRowSumTol, std::to_string(rows) + " rows, max |sum-1| = " + num(worst)};
}

Outcome dense_equivalence() {
  SeededRng rng(202);
  const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{1, 1}, {2, 3}, {4, 4}, {5, 7}, {8, 8}, {12, 9}, {12, 12}};
  double worst = 0.0;
  std::size_t fixtures = 0;
  for (const auto& [h, w] : shapes) {
    for (int rep = 0; rep < 2; ++rep) {
      const auto m = random_field(h, w, rng);
      const auto cam = random_field(h, w, rng);
      for (double gamma : {1.0, 2.0, 5.0}) {
        const auto a = oracle::dense_affinity(m, gamma);
        for (double beta : {1.0, 2.0, 4.0}) {
          const auto t = oracle::dense_transition(a, beta);
          for (std::size_t steps : {1, 4}) {
            pam::RefinementConfig cfg;
            cfg.radius = gamma;
            cfg.beta = beta;
            cfg.steps = steps;
            const std::vector<Field2D> cams = {cam};
            const auto got = pam::refine_cams(cams, m, cfg)[0];
            const auto want = oracle::dense_walk(t, cam, steps);
            for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
            ++fixtures;
          }
        }
      }
    }
  }
  return {worst <= kDenseTol, std::to_string(fixtures) + " fixtures, max abs diff = " + num(worst)};
}

Outcome identities() {
  SeededRng rng(303);
  std::size_t checks = 0;
  bool ok = true;
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12);
    const auto cam = max_normalize(random_field(h, w, rng));
    const auto raw = random_field(h, w, rng);
    const auto t = pam::transition_matrix(pam::pairwise_affinity(random_field(h, w, rng), 1.0 + rng.below(5)),
                                          1.0 + rng.below(8));
    const auto ident = pam::transition_matrix(SparseMatrix::identity(h * w), 1.0 + rng.below(8));
    for (std::size_t steps : {1, 4, 9}) {
      ok &= pam::random_walk(ident, cam, steps) == cam;
      const double c = rng.uniform();
      ok &= pam::propagate(t, Field2D(h, w, c), steps) == Field2D(h, w, c);
      ok &= pam::random_walk(t, Field2D(h, w, 1.0), steps) == Field2D(h, w, 1.0);
      ok &= pam::random_walk(t, Field2D(h, w, 0.0), steps) == Field2D(h, w, 0.0);
      checks += 4;
    }
    ok &= pam::random_walk(t, raw, 0) == raw;
    ++checks;
  }
  return {ok, std::to_string(checks) + " exact comparisons (A = I, t = 0, constant CAM)"};
}

Outcome gradients() {
  nn::NetConfig cfg;
  cfg.image_size = 8;
  cfg.encoder = {{6, 2}, {6, 1}};
  cfg.n_classes = 2;
  cfg.n_subclasses = 3;
  cfg.init_seed = 404;
  const auto params = nn::init_params(cfg);
  SeededRng rng(405);
  std::vector<Field2D> images;
  std::vector<std::vector<std::uint8_t>> yp, ys;
  for (int i = 0; i < 4; ++i) {
    images.push_back(random_field(8, 8, rng));
    std::vector<std::uint8_t> p(2), s(6, 0);
    for (std::size_t c = 0; c < 2; ++c) {
      p[c] = rng.bernoulli(0.5);
      if (p[c]) s[c * 3 + rng.below(3)] = 1;
    }
    yp.push_back(p);
    ys.push_back(s);
  }
  std::vector<nn::Example> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({&images[i], yp[i], ys[i]});
  bool ok = true;
  std::string detail;
  for (double lam : {0.0, 0.5, 1.0}) {
    nn::GradCheckOptions o;
    o.lambda = lam;
    o.coordinates = kGradCoords;
    o.seed = 406;
    const auto r = nn::grad_check(params, batch, o);
    ok &= r.checked >= kGradCoords && r.max_relative_error < kGradTol;
    detail += "lambda " + num(lam, "%.1f") + ": " + std::to_string(r.checked) + " coords, max rel err " +
              num(r.max_relative_error) + "; ";
  }
  return {ok, detail};
}

Outcome surface_metrics() {
  SeededRng rng(505);
  std::size_t mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t h = 1 + rng.below(16), w = 1 + rng.below(16);
    const auto a = oracle::random_mask(h, w, rng.uniform(0.02, 0.8), rng);
    const auto b = oracle::random_mask(h, w, rng.uniform(0.02, 0.8), rng);
    if (eval::assd(a, b) != oracle::brute_assd(a, b)) ++mismatches;
    if (eval::hd95(a, b) != oracle::brute_hd95(a, b)) ++mismatches;
  }
  return {mismatches == 0, "500 pairs, " + std::to_string(mismatches) + " inexact values"};
}

Outcome kmeans_fixtures() {
  SeededRng rng(606);
  std::size_t fixtures = 0, mismatches = 0, sse_violations = 0;
  auto check = [&](const std::vector<double>& xs, std::size_t k, std::uint64_t seed) {
    std::vector<sce::Point> pts;
    for (double x : xs) pts.push_back({x});
    const auto r = sce::kmeans(pts, k, seed);
    for (std::size_t i = 1; i < r.sse_history.size(); ++i) sse_violations += r.sse_history[i] > r.sse_history[i - 1];
    mismatches += !oracle::optimal_partitions(xs, k).contains(oracle::canonical(r.assignment));
    ++fixtures;
  };
  check({0, 1, 10, 11}, 2, 0);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> xs(4);
    for (double& x : xs) x = std::round(rng.uniform(0.0, 20.0) * 8.0) / 8.0;
    std::vector<double> sorted = xs;
    std::ranges::sort(sorted);
    if (std::ranges::adjacent_find(sorted) != sorted.end()) continue;
    for (std::size_t k = 1; k <= 3; ++k) check(xs, k, rng.next_u64());
  }
  for (int i = 0; i < 100; ++i) {
    std::vector<sce::Point> pts;
    for (int j = 0; j < 60; ++j) pts.push_back({rng.normal(), rng.normal()});
    const auto r = sce::kmeans(pts, 2 + rng.below(8), rng.next_u64());
    for (std::size_t j = 1; j < r.sse_history.size(); ++j) sse_violations += r.sse_history[j] > r.sse_history[j - 1];
  }
  return {mismatches == 0 && sse_violations == 0,
          std::to_string(fixtures) + " 4-point fixtures, " + std::to_string(mismatches) + " partition mismatches, " +
              std::to_string(sse_violations) + " SSE increases"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance_out";
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--quick") quick = true;
    else out = a;
  }
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());

  report(1, "transition rows sum to one", 10, stochasticity);
  report(2, "sparse walk equals dense matrix power", 30, dense_equivalence);
  report(3, "trivial-walk identities", 0, identities);
  report(4, "joint-loss gradients", 60, gradients);
  report(5, "surface metrics equal brute force", 60, surface_metrics);
  report(10, "k-means monotone SSE and optimal 4-point partitions", 0, kmeans_fixtures);

  if (quick) {
    std::printf("skipped benchmark criteria 6-9 (--quick)\n");
    return failures == 0 ? 0 : 1;
  }

  fs::remove_all(out);
  RunCache cache;
  RunConfig base;  // desk defaults: 400 samples, p_halo 0.9
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  AblationTable ablation;
  report(6, "ablation ordering", 600, [&] {
    RunConfig c = base;
    c.out_dir = out / "ablation";
    ablation = run_ablation(c, seeds, jobs, &cache);
    const double b = ablation.cell("baseline").dsc.mean, s = ablation.cell("SCE").dsc.mean;
    const double p = ablation.cell("PAM").dsc.mean, f = ablation.cell("SCE+PAM").dsc.mean;
    const bool ok = f > p && p > b && f > s && s > b && f - b >= kMinGain;
    return Outcome{ok, "Dice % baseline " + num(b, "%.2f") + ", SCE " + num(s, "%.2f") + ", PAM " + num(p, "%.2f") +
                           ", full " + num(f, "%.2f") + ", gain " + num(f - b, "%.2f")};
  });

  report(7, "K sweep has an interior maximizer", 0, [&] {
    RunConfig c = base;
    c.out_dir = out / "sweep_k";
    const auto t = run_sweep(c, SweepAxis::k, {1, 2, 4, 8, 16}, seeds, jobs, &cache);
    std::string d;
    for (std::size_t i = 0; i < t.values.size(); ++i)
      d += "K=" + num(t.values[i], "%g") + " " + num(t.dsc[i].mean, "%.2f") + (i + 1 < t.values.size() ? ", " : "");
    const std::size_t best = t.argmax();
    return Outcome{best != 0 && best + 1 != t.values.size(), d + "; best K=" + num(t.values[best], "%g")};
  });

  report(8, "cluster-seed robustness", 600, [&] {
    std::vector<RunConfig> runs;
    for (std::uint64_t cs : {11, 22, 33, 44}) {
      RunConfig c = base;
      c.sce.cluster_seed = cs;
      c.out_dir = out / "cluster_seeds" / ("cluster_seed_" + std::to_string(cs));
      runs.push_back(c);
    }
    std::vector<double> dice(runs.size());
    parallel_for(runs.size(), jobs, [&](std::size_t i) { dice[i] = 100.0 * run_pipeline(runs[i], Stage::eval, {}, &cache, 1).metrics->dsc; });
    const auto [lo, hi] = std::ranges::minmax(dice);
    std::string d;
    for (double v : dice) d += num(v, "%.2f") + " ";
    return Outcome{hi - lo < kMaxSeedSpread, "Dice % " + d + "spread " + num(hi - lo, "%.2f")};
  });

  report(9, "rerun from config snapshot is byte-identical", 0, [&] {
    const fs::path first = out / "ablation" / "SCE+PAM" / "seed_0";
    RunConfig again = load_config(first / "config.json");
    again.out_dir = out / "rerun";
    run_pipeline(again, Stage::eval, {}, nullptr, jobs);
    const bool same = io::read_file(first / "metrics.csv") == io::read_file(again.out_dir / "metrics.csv");
    return Outcome{same, same ? "metrics.csv identical" : "metrics.csv differs"};
  });

  return failures == 0 ? 0 : 1;
}
