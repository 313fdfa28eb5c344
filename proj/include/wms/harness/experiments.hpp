#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/io.hpp"
#include "wms/harness/config.hpp"
#include "wms/harness/parallel.hpp"
#include "wms/harness/pipeline.hpp"

namespace wms::harness {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (0 for a single value)
};

inline MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Ablation: {SCE, PAM} x {off, on}

struct AblationCell {
  const char* label;
  bool sce;
  bool pam;
};

inline constexpr std::array<AblationCell, 4> kAblationCells = {{
    {"baseline", false, false},
    {"SCE", true, false},
    {"PAM", false, true},
    {"SCE+PAM", true, true},
}};

struct AblationRow {
  std::string cell;
  bool sce = false;
  bool pam = false;
  std::uint64_t seed = 0;
  eval::MetricReport metrics;
};

struct AblationSummary {
  std::string cell;
  MeanSd dsc;  // Dice in percent
  MeanSd jaccard;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // cell-major, then seed
  std::vector<AblationSummary> cells;

  const AblationSummary& cell(const std::string& label) const {
    for (const auto& c : cells)
      if (c.cell == label) return c;
    throw Error("ablation: no cell " + label);
  }
};

inline std::string encode_ablation_csv(const AblationTable& t) {
  std::string out = "cell,sce,pam,seed,dsc,jaccard,assd,hd95\n";
  for (const auto& r : t.rows)
    out += r.cell + "," + (r.sce ? "on" : "off") + "," + (r.pam ? "on" : "off") + "," + std::to_string(r.seed) + "," +
           fmt(r.metrics.dsc) + "," + fmt(r.metrics.jaccard) + "," + fmt(r.metrics.assd) + "," + fmt(r.metrics.hd95) + "\n";
  return out;
}

inline std::string encode_ablation_summary(const AblationTable& t) {
  std::string out = "cell,mean_dsc,sd_dsc,mean_jaccard,sd_jaccard\n";
  for (const auto& c : t.cells)
    out += c.cell + "," + fmt(c.dsc.mean) + "," + fmt(c.dsc.sd) + "," + fmt(c.jaccard.mean) + "," + fmt(c.jaccard.sd) + "\n";
  return out;
}

/// The pairwise orderings of the 2x2 grid, one line each.
inline std::string ablation_orderings(const AblationTable& t) {
  const std::array<std::pair<const char*, const char*>, 5> pairs = {{
      {"SCE+PAM", "PAM"}, {"PAM", "baseline"}, {"SCE+PAM", "SCE"}, {"SCE", "baseline"}, {"SCE+PAM", "baseline"}}};
  std::string out;
  for (const auto& [a, b] : pairs) {
    const double x = t.cell(a).dsc.mean;
    const double y = t.cell(b).dsc.mean;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s > %s: %s (%.2f vs %.2f, diff %+.2f)\n", a, b, x > y ? "yes" : "no", x, y, x - y);
    out += buf;
  }
  return out;
}

/// Runs every cell for every seed. Each run writes to
/// <out>/<cell>/seed_<s>; the tables go to <out>.
namespace detail {

// One member run of a grid; failures keep their stage and gain the run directory.
inline RunReport run_member(const RunConfig& c, RunCache& cache) {
  try {
    return run_pipeline(c, Stage::eval, {}, &cache, 1);
  } catch (const StageError& e) {
    const std::string prefix = "stage " + e.stage() + ": ";
    std::string msg = e.what();
    if (msg.starts_with(prefix)) msg.erase(0, prefix.size());
    throw StageError(e.stage(), c.out_dir.string() + ": " + msg);
  }
}

}  // namespace detail

inline AblationTable run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1,
                                  RunCache* shared = nullptr) {
  if (seeds.size() < 3) throw StageError("ablate", "at least 3 seeds are required");
  RunCache local;
  RunCache& cache = shared ? *shared : local;
  const fs::path out = base.out_dir;
  std::vector<RunConfig> runs;
  AblationTable t;
  for (const auto& cell : kAblationCells) {
    for (auto seed : seeds) {
      RunConfig c = base;
      c.seed = seed;
      c.sce.enabled = cell.sce;
      c.pam.enabled = cell.pam;
      c.out_dir = out / cell.label / ("seed_" + std::to_string(seed));
      runs.push_back(c);
      t.rows.push_back({cell.label, cell.sce, cell.pam, seed, {}});
    }
  }
  // PAM-on and PAM-off cells share their trained model through the cache.
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    const auto rep = detail::run_member(runs[i], cache);
    t.rows[i].metrics = *rep.metrics;
  });
  for (const auto& cell : kAblationCells) {
    std::vector<double> d, j;
    for (const auto& r : t.rows) {
      if (r.cell != cell.label) continue;
      d.push_back(100.0 * r.metrics.dsc);
      j.push_back(100.0 * r.metrics.jaccard);
    }
    t.cells.push_back({cell.label, mean_sd(d), mean_sd(j)});
  }
  in_stage("ablate", [&] {
    io::write_file(out / "ablation.csv", encode_ablation_csv(t));
    io::write_file(out / "ablation_summary.csv", encode_ablation_summary(t));
    io::write_file(out / "orderings.txt", ablation_orderings(t));
  });
  return t;
}

// ---------------------------------------------------------------------------
// Single-axis sweeps

enum class SweepAxis { k, beta, t, gamma, theta };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::k: return "K";
    case SweepAxis::beta: return "beta";
    case SweepAxis::t: return "t";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::theta: return "theta";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "K" || s == "k") return SweepAxis::k;
  if (s == "beta") return SweepAxis::beta;
  if (s == "t") return SweepAxis::t;
  if (s == "gamma") return SweepAxis::gamma;
  if (s == "theta") return SweepAxis::theta;
  throw Error("unknown sweep axis '" + s + "' (expected K, beta, t, gamma or theta)");
}

inline RunConfig with_axis_value(RunConfig c, SweepAxis axis, double v) {
  auto as_count = [&](const char* what) {
    if (v < 0.0 || v != std::floor(v)) throw Error(std::string("sweep: ") + what + " values must be non-negative integers");
    return static_cast<std::size_t>(v);
  };
  switch (axis) {
    case SweepAxis::k: c.sce.k = as_count("K"); break;
    case SweepAxis::beta: c.pam.refine.beta = v; break;
    case SweepAxis::t: c.pam.refine.steps = as_count("t"); break;
    case SweepAxis::gamma: c.pam.refine.radius = v; break;
    case SweepAxis::theta: c.pam.refine.threshold = v; break;
  }
  c.validate();
  return c;
}

struct SweepPoint {
  double value = 0.0;
  std::uint64_t seed = 0;
  eval::MetricReport metrics;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::k;
  std::vector<double> values;
  std::vector<SweepPoint> points;  // value-major, then seed
  std::vector<MeanSd> dsc;         // per value, percent
  std::vector<MeanSd> jaccard;

  /// Index of the value with the highest mean Dice (first on ties).
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::ranges::max_element(dsc, {}, &MeanSd::mean) - dsc.begin());
  }
};

inline std::string encode_sweep_csv(const SweepTable& t) {
  std::string out = "axis,value,seed,dsc,jaccard,assd,hd95\n";
  for (const auto& p : t.points)
    out += std::string(axis_name(t.axis)) + "," + fmt(p.value) + "," + std::to_string(p.seed) + "," + fmt(p.metrics.dsc) +
           "," + fmt(p.metrics.jaccard) + "," + fmt(p.metrics.assd) + "," + fmt(p.metrics.hd95) + "\n";
  return out;
}

inline std::string encode_sweep_summary(const SweepTable& t) {
  std::string out = "value,mean_dsc,sd_dsc,mean_jaccard,sd_jaccard\n";
  for (std::size_t i = 0; i < t.values.size(); ++i)
    out += fmt(t.values[i]) + "," + fmt(t.dsc[i].mean) + "," + fmt(t.dsc[i].sd) + "," + fmt(t.jaccard[i].mean) + "," +
           fmt(t.jaccard[i].sd) + "\n";
  return out;
}

/// Line chart of mean Dice and mean Jaccard (percent) against the swept
/// values, placed at equal spacing in the given order.
inline std::string sweep_svg(const SweepTable& t) {
  const double W = 480, H = 300, L = 56, R = 20, T = 24, B = 44;
  double lo = 100.0, hi = 0.0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    lo = std::min({lo, t.dsc[i].mean, t.jaccard[i].mean});
    hi = std::max({hi, t.dsc[i].mean, t.jaccard[i].mean});
  }
  lo = std::floor(lo / 5.0) * 5.0;
  hi = std::max(lo + 5.0, std::ceil(hi / 5.0) * 5.0);
  const std::size_t n = t.values.size();
  auto x = [&](std::size_t i) { return L + (n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1)) * (W - L - R); };
  auto y = [&](double v) { return T + (hi - v) / (hi - lo) * (H - T - B); };
  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n", W, H, W, H);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                L, H - B, W - R, H - B, L, T, L, H - B);
  s += buf;
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%s</text>\n", x(i),
                  H - B + 16, fmt(t.values[i]).c_str());
    s += buf;
  }
  for (double v : {lo, (lo + hi) / 2.0, hi}) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.1f</text>\n", L - 6,
                  y(v) + 4, v);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">%s</text>\n",
                (L + W - R) / 2.0, H - 8, axis_name(t.axis));
  s += buf;
  const std::array<std::pair<const char*, const std::vector<MeanSd>*>, 2> series = {{{"dsc", &t.dsc}, {"jaccard", &t.jaccard}}};
  const std::array<const char*, 2> colour = {"#1f77b4", "#d62728"};
  for (std::size_t k = 0; k < series.size(); ++k) {
    std::string pts;
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", x(i), y((*series[k].second)[i].mean));
      pts += buf;
    }
    s += "<polyline data-metric=\"" + std::string(series[k].first) + "\" fill=\"none\" stroke=\"" + colour[k] +
         "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" fill=\"%s\">%s</text>\n", W - R - 60,
                  T + 14.0 * static_cast<double>(k + 1), colour[k], series[k].first);
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

/// One pipeline run per (value, seed), changing only the swept field.
/// Runs write to <out>/<axis>_<value>/seed_<s>; tables and chart to <out>.
inline SweepTable run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                            const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1, RunCache* shared = nullptr) {
  if (values.size() < 2) throw StageError("sweep", "at least 2 values are required");
  if (seeds.empty()) throw StageError("sweep", "no seeds");
  RunCache local;
  RunCache& cache = shared ? *shared : local;
  const fs::path out = base.out_dir;
  SweepTable t;
  t.axis = axis;
  t.values = values;
  std::vector<RunConfig> runs;
  for (double v : values) {
    for (auto seed : seeds) {
      RunConfig c = in_stage("sweep", [&] { return with_axis_value(base, axis, v); });
      c.seed = seed;
      c.out_dir = out / (std::string(axis_name(axis)) + "_" + fmt(v)) / ("seed_" + std::to_string(seed));
      runs.push_back(c);
      t.points.push_back({v, seed, {}});
    }
  }
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    t.points[i].metrics = *detail::run_member(runs[i], cache).metrics;
  });
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> d, j;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& m = t.points[vi * seeds.size() + si].metrics;
      d.push_back(100.0 * m.dsc);
      j.push_back(100.0 * m.jaccard);
    }
    t.dsc.push_back(mean_sd(d));
    t.jaccard.push_back(mean_sd(j));
  }
  in_stage("sweep", [&] {
    io::write_file(out / "sweep.csv", encode_sweep_csv(t));
    io::write_file(out / "sweep_summary.csv", encode_sweep_summary(t));
    io::write_file(out / "sweep.svg", sweep_svg(t));
  });
  return t;
}

}  // namespace wms::harness
