#ifndef SCRNET_MODEL_HPP
#define SCRNET_MODEL_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "scrnet/conv.hpp"
#include "scrnet/error.hpp"
#include "scrnet/filter.hpp"
#include "scrnet/random.hpp"
#include "scrnet/tensor.hpp"

namespace scrnet {

struct ModelConfig {
  int num_layers = 4;
  int base_channels = 16;
  int max_channels = 64;
  int input_channels = 3;
  int output_channels = 3;
  int kernel_size = 4;
  int image_size = 64;  // training resolution (square)
  float negative_slope = 0.2f;
  std::uint64_t seed = 0;
  bool use_dh = true;   // alignment decoder present; false gives the U-shaped ablation
  bool use_hfc = true;  // network input is H(s') rather than s'
  int hfc_radius = kHfcRadius;
  float hfc_sigma = static_cast<float>(kHfcSigma);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  /// Channels produced by encoder layer l (1-based).
  int channels(int l) const {
    long c = static_cast<long>(base_channels) << std::min(l - 1, 30);
    return static_cast<int>(std::min<long>(c, max_channels));
  }
  int padding() const { return (kernel_size - 2) / 2; }
  int divisor() const { return 1 << num_layers; }
};

inline void validate(const ModelConfig& c) {
  if (c.num_layers < 2 || c.num_layers > 12) throw InvalidArgument("num_layers must lie in [2,12]");
  if (c.base_channels < 1 || c.max_channels < c.base_channels) {
    throw InvalidArgument("channel config requires 1 <= base_channels <= max_channels");
  }
  if (c.input_channels < 1 || c.output_channels < 1) throw InvalidArgument("channel counts must be positive");
  if (c.kernel_size < 2 || c.kernel_size % 2 != 0) {
    throw InvalidArgument("kernel_size must be even (stride-2 halving with padding (k-2)/2)");
  }
  if (c.image_size < 1 || c.image_size % c.divisor() != 0) {
    throw InvalidArgument("image_size " + std::to_string(c.image_size) + " must be divisible by 2^num_layers = " +
                          std::to_string(c.divisor()));
  }
  if (c.hfc_radius < 0 || !(c.hfc_sigma > 0.0f)) throw InvalidArgument("invalid HFC filter parameters");
}

/// Full-scale preset: 256x256 input, 8 layers, 64..512 channels.
inline ModelConfig full_scale_model_config() {
  ModelConfig c;
  c.num_layers = 8;
  c.base_channels = 64;
  c.max_channels = 512;
  c.image_size = 256;
  return c;
}

template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;
};

/// Encoder E, alignment decoder D_H and restoration decoder D_R.
///
/// Decoder layer l (1-based) mirrors encoder layer L-l: layers 1..L-1 output
/// channels(L-l), the last outputs the image channels. Inputs are
///   D^1 : channels(L)
///   D^l : 2 * channels(L-l+1), l >= 2 (a decoder output joined with a skip).
template <typename T>
struct Model {
  ModelConfig config;
  std::vector<ConvLayer<T>> encoder;
  std::vector<ConvLayer<T>> align_decoder;    // empty when !config.use_dh
  std::vector<ConvLayer<T>> restore_decoder;

  /// Canonical order: encoder, alignment decoder, restoration decoder; weight
  /// then bias within each layer.
  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> out;
    for (const auto* group : {&encoder, &align_decoder, &restore_decoder})
      for (const auto& layer : *group) {
        out.push_back(layer.weight);
        out.push_back(layer.bias);
      }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
  }
};

/// Layer shapes in canonical order, as (weight shape, bias length).
inline std::vector<std::pair<Shape, int>> layer_shapes(const ModelConfig& c) {
  const int L = c.num_layers, k = c.kernel_size;
  std::vector<std::pair<Shape, int>> shapes;
  for (int l = 1; l <= L; ++l) {
    const int in = l == 1 ? c.input_channels : c.channels(l - 1);
    shapes.push_back({{c.channels(l), in, k, k}, c.channels(l)});
  }
  auto decoder = [&] {
    for (int l = 1; l <= L; ++l) {
      const int in = l == 1 ? c.channels(L) : 2 * c.channels(L - l + 1);
      const int out = l == L ? c.output_channels : c.channels(L - l);
      shapes.push_back({{in, out, k, k}, out});
    }
  };
  if (c.use_dh) decoder();
  decoder();
  return shapes;
}

/// Gaussian(0, 0.02) weights, zero biases, drawn in canonical order.
template <typename T>
Model<T> build_model(const ModelConfig& cfg) {
  validate(cfg);
  Model<T> m;
  m.config = cfg;
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  const auto shapes = layer_shapes(cfg);
  std::vector<ConvLayer<T>> layers;
  for (const auto& [wshape, blen] : shapes) {
    std::vector<T> w(numel(wshape));
    for (auto& v : w) v = static_cast<T>(normal(rng));
    layers.push_back({Tensor<T>::from_data(wshape, std::move(w), true), Tensor<T>::zeros({blen}, true)});
  }
  const std::size_t L = cfg.num_layers;
  m.encoder.assign(layers.begin(), layers.begin() + L);
  if (cfg.use_dh) {
    m.align_decoder.assign(layers.begin() + L, layers.begin() + 2 * L);
    m.restore_decoder.assign(layers.begin() + 2 * L, layers.end());
  } else {
    m.restore_decoder.assign(layers.begin() + L, layers.end());
  }

  // Wiring check: each decoder layer consumes exactly what the concatenations produce.
  for (std::size_t l = 2; l <= L; ++l) {
    const int skip = cfg.channels(static_cast<int>(L - l + 1));
    const int prev = m.restore_decoder[l - 2].weight.dim(1);
    if (m.restore_decoder[l - 1].weight.dim(0) != prev + skip) throw Error("build_model: D_R wiring mismatch");
    if (cfg.use_dh && m.align_decoder[l - 1].weight.dim(0) != m.align_decoder[l - 2].weight.dim(1) + skip) {
      throw Error("build_model: D_H wiring mismatch");
    }
  }
  return m;
}

template <typename T>
struct ForwardResult {
  Tensor<T> aligned_hfc;  // undefined without D_H
  Tensor<T> restored;     // in [0,1]
};

/// f_E^l = E^l(f_E^{l-1}); f_H^0 = f_R^0 = f_E^L;
/// f_H^l = [D_H^l(f_H^{l-1}), f_E^{L-l}];  f_R^l = [D_R^l(f_R^{l-1}), D_H^l(f_H^{l-1})].
/// Without D_H the restoration skip is f_E^{L-l} instead.
template <typename T>
ForwardResult<T> forward(const Model<T>& model, const Tensor<T>& x) {
  const ModelConfig& c = model.config;
  const int L = c.num_layers, s = 2, p = c.padding();
  if (x.shape().size() != 4 || x.dim(1) != c.input_channels) {
    throw InvalidArgument("forward: expected [N," + std::to_string(c.input_channels) + ",H,W], got " +
                          to_string(x.shape()));
  }
  if (x.dim(2) % c.divisor() != 0 || x.dim(3) % c.divisor() != 0) {
    throw InvalidArgument("forward: spatial size " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                          " not divisible by 2^" + std::to_string(L));
  }
  const T slope = static_cast<T>(c.negative_slope);

  std::vector<Tensor<T>> enc{x};
  for (int l = 1; l <= L; ++l) {
    const auto& layer = model.encoder[l - 1];
    enc.push_back(leaky_relu(conv2d(enc.back(), layer.weight, layer.bias, s, p), slope));
  }

  Tensor<T> h = enc[L];
  Tensor<T> r = enc[L];
  for (int l = 1; l < L; ++l) {
    const auto& rl = model.restore_decoder[l - 1];
    Tensor<T> dr = relu(conv2d_transpose(r, rl.weight, rl.bias, s, p));
    if (c.use_dh) {
      const auto& hl = model.align_decoder[l - 1];
      Tensor<T> dh = relu(conv2d_transpose(h, hl.weight, hl.bias, s, p));
      h = concat_channels(dh, enc[L - l]);
      r = concat_channels(dr, dh);
    } else {
      r = concat_channels(dr, enc[L - l]);
    }
  }

  ForwardResult<T> out;
  if (c.use_dh) {
    const auto& hl = model.align_decoder[L - 1];
    out.aligned_hfc = conv2d_transpose(h, hl.weight, hl.bias, s, p);
  }
  const auto& rl = model.restore_decoder[L - 1];
  out.restored = affine(tanh(conv2d_transpose(r, rl.weight, rl.bias, s, p)), T(0.5), T(0.5));
  return out;
}

/// Copy whose parameters do not record gradients; for inference.
template <typename T>
Model<T> frozen(const Model<T>& src) {
  Model<T> m = src;
  for (auto* group : {&m.encoder, &m.align_decoder, &m.restore_decoder})
    for (auto& layer : *group) {
      layer.weight = Tensor<T>::from_data(layer.weight.shape(), layer.weight.values());
      layer.bias = Tensor<T>::from_data(layer.bias.shape(), layer.bias.values());
    }
  return m;
}

/// Copies parameters between precisions (e.g. a float checkpoint into a
/// double model for gradient checking).
template <typename To, typename From>
Model<To> convert_model(const Model<From>& src) {
  Model<To> m = build_model<To>(src.config);
  auto dst = m.parameters();
  const auto from = src.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::transform(from[i].values().begin(), from[i].values().end(), dst[i].values().begin(),
                   [](From v) { return static_cast<To>(v); });
  }
  return m;
}

}  // namespace scrnet

#endif  // SCRNET_MODEL_HPP
