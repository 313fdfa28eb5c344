#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/rng.hpp"
#include "wms/nn/tinynet.hpp"

namespace wms::sce {

/// Frozen, randomly initialized conv stack used only to embed images for
/// sub-class clustering.
///
/// The image is mean-centred, passed through two stride-2 3x3 conv + ReLU
/// layers with dim/2 output channels, and summarized as
///   [ mean(image), GAP(F_1..F_{dim/2-1}) | GMP(F_0..F_{dim/2-1}) ].
/// Slot 0 carries the raw mean intensity (lost by centring); every other
/// coordinate is invariant to a constant intensity shift.
class FrozenExtractor {
 public:
  explicit FrozenExtractor(std::uint64_t probe_seed, std::size_t dim = 64) : dim_(dim) {
    wms::detail::require(dim >= 4 && dim % 2 == 0, "FrozenExtractor: dim must be even and >= 4");
    const std::size_t half = dim / 2;
    const std::size_t hidden = std::max<std::size_t>(4, half / 2);
    SeededRng rng(mix_seed(probe_seed, 0xFEA7));
    auto he = [&](std::size_t out, std::size_t in) {
      std::vector<double> w(out * in * 9);
      const double std = std::sqrt(2.0 / static_cast<double>(in * 9));
      for (double& v : w) v = rng.normal(0.0, std);
      return w;
    };
    w1_ = he(hidden, 1);
    b1_.assign(hidden, 0.0);
    w2_ = he(half, hidden);
    b2_.assign(half, 0.0);
  }

  std::size_t dim() const { return dim_; }

  std::vector<double> operator()(const Field2D& image) const {
    double mean = 0.0;
    for (double v : image.values()) mean += v;
    mean /= static_cast<double>(image.size());
    nn::Tensor3 x(1, image.height(), image.width());
    for (std::size_t i = 0; i < image.size(); ++i) x.v[i] = image[i] - mean;

    nn::Tensor3 h1, h2;
    const std::size_t s1 = x.h % 2 == 0 ? 2 : 1;
    nn::detail::conv3x3_forward(x, w1_, b1_, s1, h1);
    for (double& v : h1.v) v = std::max(v, 0.0);
    const std::size_t s2 = h1.h % 2 == 0 ? 2 : 1;
    nn::detail::conv3x3_forward(h1, w2_, b2_, s2, h2);
    for (double& v : h2.v) v = std::max(v, 0.0);

    const std::size_t half = dim_ / 2;
    std::vector<double> out(dim_, 0.0);
    const double inv = 1.0 / static_cast<double>(h2.h * h2.w);
    for (std::size_t k = 0; k < half; ++k) {
      const auto ch = h2.channel(k);
      double s = 0.0;
      double m = 0.0;
      for (double v : ch) {
        s += v;
        m = std::max(m, v);
      }
      out[k] = s * inv;
      out[half + k] = m;
    }
    out[0] = mean;
    return out;
  }

 private:
  std::size_t dim_;
  std::vector<double> w1_, b1_, w2_, b2_;
};

inline std::vector<double> extract_frozen_features(const Field2D& image, std::uint64_t probe_seed,
                                                   std::size_t dim = 64) {
  return FrozenExtractor(probe_seed, dim)(image);
}

}  // namespace wms::sce
