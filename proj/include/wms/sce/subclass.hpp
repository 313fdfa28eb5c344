#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/io.hpp"
#include "wms/core/rng.hpp"
#include "wms/sce/features.hpp"
#include "wms/sce/kmeans.hpp"
#include "wms/synth/dataset.hpp"

namespace wms::sce {

struct ClusterLabel {
  std::size_t sample_id = 0;
  std::size_t class_id = 0;  // zero-based primary class
  std::size_t cluster = 0;   // in [0, K)
  bool operator==(const ClusterLabel&) const = default;
};

/// Sub-class cluster of every (sample, class) pair with y_p[class] = 1.
struct SubClassAssignment {
  std::size_t k = 1;
  std::vector<ClusterLabel> labels;
  bool operator==(const SubClassAssignment&) const = default;
};

/// Concatenation over classes of one-hot(K) for assigned classes, zeros(K) otherwise.
inline std::vector<std::uint8_t> subclass_vector(const std::vector<std::uint8_t>& y_p,
                                                 const std::vector<std::pair<std::size_t, std::size_t>>& clusters,
                                                 std::size_t k) {
  std::vector<std::uint8_t> y_s(y_p.size() * k, 0);
  for (const auto& [c, cl] : clusters) {
    if (c >= y_p.size()) throw Error("build_subclass_labels: class " + std::to_string(c) + " out of range");
    if (!y_p[c]) throw Error("build_subclass_labels: assignment for class " + std::to_string(c) +
                             " that the sample does not contain");
    if (cl >= k) throw Error("build_subclass_labels: cluster " + std::to_string(cl) + " >= K");
    y_s[c * k + cl] = 1;
  }
  return y_s;
}

/// Fills sample.y_s for every sample. Assignments must cover exactly the
/// present (sample, class) pairs.
inline void build_subclass_labels(synth::Dataset& d, const SubClassAssignment& a) {
  std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> by_sample;
  for (const auto& l : a.labels) by_sample[l.sample_id].emplace_back(l.class_id, l.cluster);
  std::size_t used = 0;
  for (auto& s : d.samples) {
    const auto it = by_sample.find(s.id);
    const std::vector<std::pair<std::size_t, std::size_t>> none;
    const auto& cl = it == by_sample.end() ? none : it->second;
    s.y_s = subclass_vector(s.y_p, cl, a.k);
    const auto present = static_cast<std::size_t>(std::ranges::count(s.y_p, std::uint8_t{1}));
    if (cl.size() != present) {
      throw Error("build_subclass_labels: sample " + synth::sample_name(s.id) + " has " + std::to_string(present) +
                  " present classes but " + std::to_string(cl.size()) + " assignments");
    }
    used += cl.size();
  }
  if (used != a.labels.size()) throw Error("build_subclass_labels: assignments reference unknown samples");
}

/// Per-dimension z-scoring (constant dimensions map to 0).
inline void standardize(std::vector<Point>& pts) {
  if (pts.empty()) return;
  const std::size_t dim = pts[0].size();
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[d];
    mean /= static_cast<double>(pts.size());
    double var = 0.0;
    for (const auto& p : pts) var += (p[d] - mean) * (p[d] - mean);
    const double sd = std::sqrt(var / static_cast<double>(pts.size()));
    for (auto& p : pts) p[d] = sd > 1e-12 ? (p[d] - mean) / sd : 0.0;
  }
}

struct ClusterOptions {
  std::size_t k = 8;
  std::uint64_t feature_seed = 0;
  std::uint64_t cluster_seed = 0;
  std::size_t feature_dim = 64;
};

/// Embeds every image with the frozen extractor and runs k-means separately
/// for each primary class over the images that contain it. Multi-label
/// images contribute the same whole-image vector to each of their classes.
inline SubClassAssignment cluster_subclasses(const synth::Dataset& d, const ClusterOptions& opt) {
  const FrozenExtractor extract(opt.feature_seed, opt.feature_dim);
  std::vector<Point> feats;
  feats.reserve(d.size());
  for (const auto& s : d.samples) feats.push_back(extract(s.image));

  SubClassAssignment out;
  out.k = opt.k;
  for (std::size_t c = 0; c < d.n_classes; ++c) {
    std::vector<Point> pts;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.samples[i].y_p[c]) {
        pts.push_back(feats[i]);
        ids.push_back(d.samples[i].id);
      }
    }
    if (pts.empty()) continue;
    standardize(pts);
    KMeansResult km;
    try {
      km = kmeans(pts, opt.k, mix_seed(opt.cluster_seed, c));
    } catch (const InvariantError&) {
      throw;
    } catch (const Error& e) {
      throw Error("cluster_subclasses: class " + std::to_string(c) + ": " + e.what());
    }
    for (std::size_t i = 0; i < pts.size(); ++i) out.labels.push_back({ids[i], c, km.assignment[i]});
  }
  std::ranges::sort(out.labels, [](const ClusterLabel& a, const ClusterLabel& b) {
    return a.sample_id != b.sample_id ? a.sample_id < b.sample_id : a.class_id < b.class_id;
  });
  return out;
}

// CSV: sample_id,class_id,cluster_id (K is recorded in a leading comment line).

inline std::string encode_assignment_csv(const SubClassAssignment& a) {
  std::string out = "# k=" + std::to_string(a.k) + "\nsample_id,class_id,cluster_id\n";
  for (const auto& l : a.labels)
    out += synth::sample_name(l.sample_id) + "," + std::to_string(l.class_id) + "," + std::to_string(l.cluster) + "\n";
  return out;
}

inline SubClassAssignment decode_assignment_csv(const std::string& text, const std::string& what = "assignment csv") {
  std::istringstream in(text);
  std::string line;
  SubClassAssignment a;
  std::getline(in, line);
  if (line.rfind("# k=", 0) != 0) throw Error(what + ": missing '# k=' line");
  a.k = std::stoul(line.substr(4));
  std::getline(in, line);
  if (line != "sample_id,class_id,cluster_id") throw Error(what + ": bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, cls, cl;
    if (!std::getline(ss, id, ',') || !std::getline(ss, cls, ',') || !std::getline(ss, cl, ',') || id.size() < 2)
      throw Error(what + ": bad row '" + line + "'");
    a.labels.push_back({std::stoul(id.substr(1)), std::stoul(cls), std::stoul(cl)});
  }
  return a;
}

inline void write_assignment(const std::filesystem::path& path, const SubClassAssignment& a) {
  io::write_file(path, encode_assignment_csv(a));
}

inline SubClassAssignment read_assignment(const std::filesystem::path& path) {
  return decode_assignment_csv(io::read_file(path), path.string());
}

}  // namespace wms::sce
