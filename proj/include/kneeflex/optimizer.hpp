#pragma once

#include <vector>

#include "kneeflex/tensor.hpp"

namespace kneeflex {

/// RMSProp: v <- rho v + (1 - rho) g^2;  w <- w - lr g / (sqrt(v) + eps).
struct RmsPropState {
  float lr = 0.001f;
  float rho = 0.9f;
  float eps = 1e-7f;
  std::vector<Tensor> v;  // one accumulator per parameter tensor, lazily zero-initialised
};

/// Applies one update to every parameter. Throws ShapeError on mismatched lists.
void rmsprop_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, RmsPropState& state);

}  // namespace kneeflex
