#pragma once

#include "nvc/tensor.hpp"

namespace nvc {

/// Bottleneck activations: continuous straight out of the encoder, integer
/// valued once quantized.
template <typename T>
struct Latent {
  Tensor<T> values;  // N x latent_channels x h x w
  bool quantized = false;
};

}  // namespace nvc
