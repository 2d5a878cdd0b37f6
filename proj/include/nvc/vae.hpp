#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nvc/conv.hpp"
#include "nvc/latent.hpp"
#include "nvc/optim.hpp"
#include "nvc/rng.hpp"
#include "nvc/tensor.hpp"

namespace nvc {

inline constexpr double kLeakySlope = 0.2;

/// Network hyperparameters. The codec is fully convolutional: three stride-2
/// 5x5 convolutions down (channels in -> hidden/2 -> hidden -> latent), the
/// mirror image up with transposed convolutions and a final sigmoid. No
/// normalization layers, no hyperprior.
struct ArchitectureSpec {
  std::int64_t latent_channels = 16;
  std::int64_t hidden_channels = 256;
  std::int64_t input_channels = 3;
  std::int64_t downsample_factor = 8;  // three stride-2 stages

  void validate() const {
    if (latent_channels < 1) throw config_error("architecture: latent_channels must be >= 1");
    if (hidden_channels < latent_channels)
      throw config_error("architecture: hidden_channels (" + std::to_string(hidden_channels) +
                         ") must be >= latent_channels (" + std::to_string(latent_channels) +
                         ")");
    if (hidden_channels % 2 != 0)
      throw config_error("architecture: hidden_channels must be even");
    if (input_channels < 1) throw config_error("architecture: input_channels must be >= 1");
    if (downsample_factor != 8)
      throw config_error("architecture: this build uses three stride-2 stages, so "
                         "downsample_factor must be 8");
  }

  bool operator==(const ArchitectureSpec&) const = default;
};

/// Encoder/decoder parameter bundle. With `gaussian_head` the encoder emits
/// 2x latent channels (mean and log-variance) for the diagnostic Gaussian
/// posterior mode; the plain mode emits the latent directly.
template <typename T>
struct VaeModel {
  ArchitectureSpec spec;
  bool gaussian_head = false;

  static constexpr int kKernel = 5;
  static constexpr int kStride = 2;
  static constexpr int kPad = 2;

  // enc0.w, enc0.b, ..., dec2.b — fixed order, the checkpoint relies on it.
  std::vector<Parameter<T>> params;

  struct ParamInfo {
    std::string name;
    Shape shape;
    std::int64_t fan_in;  // 0 for biases (zero-initialized)
  };

  /// The fixed parameter layout for a given architecture. Weights are OIKK;
  /// a transposed-conv kernel's O extent is the channel count it consumes,
  /// so fan-in is O * K * K for those and I * K * K for forward convs.
  static std::vector<ParamInfo> layout(const ArchitectureSpec& spec, bool gaussian_head) {
    const std::int64_t in = spec.input_channels;
    const std::int64_t half = spec.hidden_channels / 2;
    const std::int64_t hid = spec.hidden_channels;
    const std::int64_t lat = spec.latent_channels;
    const std::int64_t enc_out = gaussian_head ? 2 * lat : lat;
    const std::int64_t K = kKernel;
    return {
        {"enc0.w", {half, in, K, K}, in * K * K},
        {"enc0.b", {half}, 0},
        {"enc1.w", {hid, half, K, K}, half * K * K},
        {"enc1.b", {hid}, 0},
        {"enc2.w", {enc_out, hid, K, K}, hid * K * K},
        {"enc2.b", {enc_out}, 0},
        {"dec0.w", {lat, hid, K, K}, lat * K * K},
        {"dec0.b", {hid}, 0},
        {"dec1.w", {hid, half, K, K}, hid * K * K},
        {"dec1.b", {half}, 0},
        {"dec2.w", {half, in, K, K}, half * K * K},
        {"dec2.b", {in}, 0},
    };
  }

  static VaeModel init(const ArchitectureSpec& spec, std::uint64_t seed,
                       bool trainable = true, bool gaussian_head = false) {
    spec.validate();
    VaeModel m;
    m.spec = spec;
    m.gaussian_head = gaussian_head;
    std::mt19937_64 g(seed);
    for (const auto& info : layout(spec, gaussian_head)) {
      std::vector<T> w(static_cast<std::size_t>(numel_of(info.shape)), T(0));
      if (info.fan_in > 0) {
        const double bound = std::sqrt(1.0 / static_cast<double>(info.fan_in));
        for (auto& v : w) v = static_cast<T>(uniform(g, -bound, bound));
      }
      m.params.emplace_back(info.name, Tensor<T>(info.shape, std::move(w)), trainable);
    }
    return m;
  }

  Parameter<T>& param(std::size_t i) { return params[i]; }
  const Tensor<T>& weight(std::size_t layer) const { return params[2 * layer].value; }
  const Tensor<T>& bias_of(std::size_t layer) const { return params[2 * layer + 1].value; }

  std::vector<Parameter<T>*> trainable_params() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params) out.push_back(&p);
    return out;
  }

  /// f: image (N x C x H x W, pixels in [0,1]) -> continuous latent.
  /// H and W must be divisible by the downsample factor.
  Latent<T> encode(const Tensor<T>& image) const {
    const Shape& s = image.shape();
    if (s.size() != 4 || s[1] != spec.input_channels)
      throw shape_error("encode: expected N x " + std::to_string(spec.input_channels) +
                        " x H x W input, got " + shape_str(s));
    if (s[2] % spec.downsample_factor != 0 || s[3] % spec.downsample_factor != 0)
      throw shape_error("encode: extents " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                        " must be divisible by " + std::to_string(spec.downsample_factor));
    auto h0 = leaky_relu(bias_add(conv2d(image, weight(0), kStride, kPad), bias_of(0)),
                         static_cast<T>(kLeakySlope));
    auto h1 = leaky_relu(bias_add(conv2d(h0, weight(1), kStride, kPad), bias_of(1)),
                         static_cast<T>(kLeakySlope));
    auto z = bias_add(conv2d(h1, weight(2), kStride, kPad), bias_of(2));
    return Latent<T>{z, false};
  }

  /// For the gaussian head: splits the encoder output into (mean, log-var).
  std::pair<Tensor<T>, Tensor<T>> split_posterior(const Latent<T>& enc_out) const {
    if (!gaussian_head) throw error("split_posterior: model has no gaussian head");
    const std::int64_t lat = spec.latent_channels;
    return {slice_channels(enc_out.values, 0, lat),
            slice_channels(enc_out.values, lat, 2 * lat)};
  }

  /// g: latent -> reconstruction with pixels in (0,1). Accepts quantized or
  /// continuous latents; each stage exactly doubles the spatial extents.
  Tensor<T> decode(const Latent<T>& latent) const {
    const Shape& s = latent.values.shape();
    if (s.size() != 4 || s[1] != spec.latent_channels)
      throw shape_error("decode: expected N x " + std::to_string(spec.latent_channels) +
                        " x h x w latent, got " + shape_str(s));
    auto up = [&](const Tensor<T>& x, std::size_t layer) {
      return transposed_conv2d(x, weight(layer), kStride, kPad,
                               std::pair{2 * x.shape()[2], 2 * x.shape()[3]});
    };
    auto h0 = leaky_relu(bias_add(up(latent.values, 3), bias_of(3)),
                         static_cast<T>(kLeakySlope));
    auto h1 = leaky_relu(bias_add(up(h0, 4), bias_of(4)), static_cast<T>(kLeakySlope));
    return sigmoid(bias_add(up(h1, 5), bias_of(5)));
  }
};

/// Rounds to the nearest integer, ties away from zero. Idempotent; the result
/// is detached from the tape (rounding has no useful gradient).
template <typename T>
Latent<T> quantize(const Latent<T>& latent) {
  std::vector<T> q(latent.values.data());
  for (auto& v : q) v = std::round(v);
  return Latent<T>{Tensor<T>(latent.values.shape(), std::move(q)), true};
}

}  // namespace nvc
