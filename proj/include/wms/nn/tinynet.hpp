#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/rng.hpp"

namespace wms::nn {

struct ConvSpec {
  std::size_t out_channels = 8;
  std::size_t stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

/// Architecture of the classifier: a stack of 3x3 conv + ReLU layers (zero
/// padding 1) producing the feature stack F, followed by two 1x1 heads
/// read through global average pooling.
struct NetConfig {
  std::size_t image_size = 64;
  std::vector<ConvSpec> encoder = {{8, 2}, {16, 2}, {16, 1}};
  std::size_t n_classes = 1;
  std::size_t n_subclasses = 8;  // K; head_s has n_classes * K outputs
  std::uint64_t init_seed = 0;

  std::size_t feature_channels() const { return encoder.back().out_channels; }

  std::size_t feature_size() const {
    std::size_t s = image_size;
    for (const auto& l : encoder) s = (s - 1) / l.stride + 1;
    return s;
  }

  void validate() const {
    wms::detail::require(!encoder.empty(), "NetConfig: encoder needs at least one layer");
    wms::detail::require(image_size >= 1, "NetConfig: image_size must be >= 1");
    wms::detail::require(n_classes >= 1, "NetConfig: n_classes must be >= 1");
    wms::detail::require(n_subclasses >= 1, "NetConfig: n_subclasses must be >= 1");
    std::size_t s = image_size;
    for (const auto& l : encoder) {
      wms::detail::require(l.out_channels >= 1, "NetConfig: conv layers need >= 1 channel");
      wms::detail::require(l.stride == 1 || l.stride == 2, "NetConfig: stride must be 1 or 2");
      if (l.stride == 2) wms::detail::require(s % 2 == 0, "NetConfig: stride-2 layer on an odd-sized input");
      s = (s - 1) / l.stride + 1;
    }
    wms::detail::require(feature_channels() >= n_classes, "NetConfig: feature channels must be >= n_classes");
  }

  bool operator==(const NetConfig&) const = default;
};

/// One named parameter tensor (float32 storage).
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
  bool operator==(const Param&) const = default;
};

/// Parameters in a fixed order: conv{i}.weight, conv{i}.bias for every
/// encoder layer, then head_p.weight, head_p.bias, head_s.weight, head_s.bias.
struct TinyNetParams {
  NetConfig config;
  std::vector<Param> params;

  std::size_t conv_weight(std::size_t layer) const { return 2 * layer; }
  std::size_t conv_bias(std::size_t layer) const { return 2 * layer + 1; }
  std::size_t head_p_weight() const { return 2 * config.encoder.size(); }
  std::size_t head_p_bias() const { return head_p_weight() + 1; }
  std::size_t head_s_weight() const { return head_p_weight() + 2; }
  std::size_t head_s_bias() const { return head_p_weight() + 3; }
  bool is_subclass_head(std::size_t index) const { return index >= head_s_weight(); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.data.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& p : params)
      for (float v : p.data)
        if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const TinyNetParams&) const = default;
};

/// He-normal conv weights, small normal head weights, zero biases.
inline TinyNetParams init_params(const NetConfig& cfg) {
  cfg.validate();
  TinyNetParams p;
  p.config = cfg;
  SeededRng rng(cfg.init_seed);
  auto normal_tensor = [&](std::string name, std::vector<std::size_t> shape, double std) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    Param t{std::move(name), std::move(shape), std::vector<float>(n)};
    for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, std));
    return t;
  };
  auto zeros = [](std::string name, std::size_t n) { return Param{std::move(name), {n}, std::vector<float>(n, 0.0f)}; };
  std::size_t in = 1;
  for (std::size_t l = 0; l < cfg.encoder.size(); ++l) {
    const std::size_t out = cfg.encoder[l].out_channels;
    p.params.push_back(normal_tensor("conv" + std::to_string(l) + ".weight", {out, in, 3, 3},
                                     std::sqrt(2.0 / static_cast<double>(in * 9))));
    p.params.push_back(zeros("conv" + std::to_string(l) + ".bias", out));
    in = out;
  }
  const std::size_t d = cfg.feature_channels();
  const double head_std = 0.1 / std::sqrt(static_cast<double>(d));
  p.params.push_back(normal_tensor("head_p.weight", {cfg.n_classes, d}, head_std));
  p.params.push_back(zeros("head_p.bias", cfg.n_classes));
  p.params.push_back(normal_tensor("head_s.weight", {cfg.n_classes * cfg.n_subclasses, d}, head_std));
  p.params.push_back(zeros("head_s.bias", cfg.n_classes * cfg.n_subclasses));
  return p;
}

/// Parameters widened to double; the working copy for forward/backward.
using DoubleParams = std::vector<std::vector<double>>;

inline DoubleParams widen(const TinyNetParams& p) {
  DoubleParams out;
  out.reserve(p.params.size());
  for (const auto& t : p.params) out.emplace_back(t.data.begin(), t.data.end());
  return out;
}

/// Gradients share the parameter layout.
inline DoubleParams zeros_like(const TinyNetParams& p) {
  DoubleParams out;
  for (const auto& t : p.params) out.emplace_back(t.data.size(), 0.0);
  return out;
}

/// Channel-major activation stack.
struct Tensor3 {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}

  double& at(std::size_t ch, std::size_t r, std::size_t col) { return v[(ch * h + r) * w + col]; }
  double at(std::size_t ch, std::size_t r, std::size_t col) const { return v[(ch * h + r) * w + col]; }
  std::span<double> channel(std::size_t ch) { return {v.data() + ch * h * w, h * w}; }
  std::span<const double> channel(std::size_t ch) const { return {v.data() + ch * h * w, h * w}; }
};

namespace detail {

// out[o] += sum_i sum_k w[o,i,k] * in[i, stride*y + ky - 1, stride*x + kx - 1]
inline void conv3x3_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                            std::size_t stride, Tensor3& out) {
  const std::size_t oh = (in.h - 1) / stride + 1;
  const std::size_t ow = (in.w - 1) / stride + 1;
  const std::size_t oc = bias.size();
  out = Tensor3(oc, oh, ow);
  for (std::size_t o = 0; o < oc; ++o) {
    auto dst = out.channel(o);
    std::fill(dst.begin(), dst.end(), bias[o]);
    for (std::size_t i = 0; i < in.c; ++i) {
      const auto src = in.channel(i);
      const double* k = weight.data() + (o * in.c + i) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wk = k[ky * 3 + kx];
          for (std::size_t y = 0; y < oh; ++y) {
            const long sy = static_cast<long>(y * stride + ky) - 1;
            if (sy < 0 || sy >= static_cast<long>(in.h)) continue;
            const double* srow = src.data() + static_cast<std::size_t>(sy) * in.w;
            double* drow = dst.data() + y * ow;
            for (std::size_t x = 0; x < ow; ++x) {
              const long sx = static_cast<long>(x * stride + kx) - 1;
              if (sx < 0 || sx >= static_cast<long>(in.w)) continue;
              drow[x] += wk * srow[sx];
            }
          }
        }
      }
    }
  }
}

// Accumulates dW, dB and (optionally) dIn from dOut (gradient w.r.t. pre-activation).
inline void conv3x3_backward(const Tensor3& in, std::span<const double> weight, std::size_t stride,
                             const Tensor3& d_out, std::span<double> d_weight, std::span<double> d_bias,
                             Tensor3* d_in) {
  const std::size_t oh = d_out.h;
  const std::size_t ow = d_out.w;
  if (d_in) *d_in = Tensor3(in.c, in.h, in.w);
  for (std::size_t o = 0; o < d_out.c; ++o) {
    const auto g = d_out.channel(o);
    double gb = 0.0;
    for (double v : g) gb += v;
    d_bias[o] += gb;
    for (std::size_t i = 0; i < in.c; ++i) {
      const auto src = in.channel(i);
      const double* k = weight.data() + (o * in.c + i) * 9;
      double* dk = d_weight.data() + (o * in.c + i) * 9;
      double* dsrc = d_in ? d_in->channel(i).data() : nullptr;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wk = k[ky * 3 + kx];
          double acc = 0.0;
          for (std::size_t y = 0; y < oh; ++y) {
            const long sy = static_cast<long>(y * stride + ky) - 1;
            if (sy < 0 || sy >= static_cast<long>(in.h)) continue;
            const double* srow = src.data() + static_cast<std::size_t>(sy) * in.w;
            const double* grow = g.data() + y * ow;
            double* drow = dsrc ? dsrc + static_cast<std::size_t>(sy) * in.w : nullptr;
            for (std::size_t x = 0; x < ow; ++x) {
              const long sx = static_cast<long>(x * stride + kx) - 1;
              if (sx < 0 || sx >= static_cast<long>(in.w)) continue;
              acc += grow[x] * srow[sx];
              if (drow) drow[sx] += wk * grow[x];
            }
          }
          dk[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

}  // namespace detail

/// Everything the backward pass needs from one forward pass.
struct ForwardResult {
  std::vector<Tensor3> inputs;  // input to each conv layer (post-ReLU of the previous one)
  Tensor3 features;             // F = ReLU(last conv), d x h x w
  std::vector<double> pooled;   // GAP(F), length d
  std::vector<double> logits_p; // length C
  std::vector<double> logits_s; // length C*K
};

inline Tensor3 image_tensor(const Field2D& image) {
  Tensor3 t(1, image.height(), image.width());
  std::copy(image.values().begin(), image.values().end(), t.v.begin());
  return t;
}

inline std::vector<double> head_apply(std::span<const double> weight, std::span<const double> bias,
                                      std::span<const double> pooled) {
  const std::size_t d = pooled.size();
  std::vector<double> out(bias.begin(), bias.end());
  for (std::size_t o = 0; o < out.size(); ++o)
    for (std::size_t k = 0; k < d; ++k) out[o] += weight[o * d + k] * pooled[k];
  return out;
}

/// Forward pass with double-precision parameters.
inline ForwardResult forward(const NetConfig& cfg, const DoubleParams& w, const Field2D& image) {
  if (image.height() != cfg.image_size || image.width() != cfg.image_size) {
    throw Error("forward: image is " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                ", network expects " + std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
  }
  ForwardResult r;
  Tensor3 x = image_tensor(image);
  for (std::size_t l = 0; l < cfg.encoder.size(); ++l) {
    Tensor3 y;
    detail::conv3x3_forward(x, w[2 * l], w[2 * l + 1], cfg.encoder[l].stride, y);
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    r.inputs.push_back(std::move(x));
    x = std::move(y);
  }
  r.features = std::move(x);
  const std::size_t d = r.features.c;
  const double inv = 1.0 / static_cast<double>(r.features.h * r.features.w);
  r.pooled.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0.0;
    for (double v : r.features.channel(k)) s += v;
    r.pooled[k] = s * inv;
  }
  const std::size_t hp = 2 * cfg.encoder.size();
  r.logits_p = head_apply(w[hp], w[hp + 1], r.pooled);
  r.logits_s = head_apply(w[hp + 2], w[hp + 3], r.pooled);
  return r;
}

inline ForwardResult forward(const TinyNetParams& p, const Field2D& image) {
  return forward(p.config, widen(p), image);
}

/// Pre-GAP response map of output `o` of a 1x1 head over F: w_o . F + b_o.
inline Field2D response_map(const Tensor3& features, std::span<const double> weight, std::span<const double> bias,
                            std::size_t o) {
  Field2D out(features.h, features.w, bias[o]);
  for (std::size_t k = 0; k < features.c; ++k) {
    const double wk = weight[o * features.c + k];
    const auto ch = features.channel(k);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wk * ch[i];
  }
  return out;
}

/// Backpropagates d(loss)/d(logits) into `grads` (accumulating). When
/// `include_subclass_head` is false the head_s gradients are left untouched.
inline void backward(const NetConfig& cfg, const DoubleParams& w, const ForwardResult& fr,
                     std::span<const double> d_logits_p, std::span<const double> d_logits_s, DoubleParams& grads,
                     bool include_subclass_head = true) {
  const std::size_t hp = 2 * cfg.encoder.size();
  const std::size_t d = fr.pooled.size();
  std::vector<double> d_pooled(d, 0.0);
  auto head_back = [&](std::size_t wi, std::span<const double> dl, bool accumulate_params) {
    for (std::size_t o = 0; o < dl.size(); ++o) {
      if (accumulate_params) {
        grads[wi + 1][o] += dl[o];
        for (std::size_t k = 0; k < d; ++k) grads[wi][o * d + k] += dl[o] * fr.pooled[k];
      }
      for (std::size_t k = 0; k < d; ++k) d_pooled[k] += dl[o] * w[wi][o * d + k];
    }
  };
  head_back(hp, d_logits_p, true);
  head_back(hp + 2, d_logits_s, include_subclass_head);

  // GAP then ReLU of the last layer.
  Tensor3 g(fr.features.c, fr.features.h, fr.features.w);
  const double inv = 1.0 / static_cast<double>(g.h * g.w);
  for (std::size_t k = 0; k < d; ++k) {
    auto gk = g.channel(k);
    const auto fk = fr.features.channel(k);
    for (std::size_t i = 0; i < gk.size(); ++i) gk[i] = fk[i] > 0.0 ? d_pooled[k] * inv : 0.0;
  }
  for (std::size_t l = cfg.encoder.size(); l-- > 0;) {
    Tensor3 d_in;
    detail::conv3x3_backward(fr.inputs[l], w[2 * l], cfg.encoder[l].stride, g, grads[2 * l], grads[2 * l + 1],
                             l > 0 ? &d_in : nullptr);
    if (l == 0) break;
    // inputs[l] is the ReLU output of layer l-1.
    const auto& a = fr.inputs[l];
    for (std::size_t i = 0; i < d_in.v.size(); ++i)
      if (!(a.v[i] > 0.0)) d_in.v[i] = 0.0;
    g = std::move(d_in);
  }
}

}  // namespace wms::nn
