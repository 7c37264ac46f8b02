#include "kneeflex/optimizer.hpp"

#include <cmath>

namespace kneeflex {

void rmsprop_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, RmsPropState& state) {
  if (params.size() != grads.size()) throw ShapeError("rmsprop: parameter and gradient counts differ");
  if (state.v.empty())
    for (const Tensor* p : params) state.v.emplace_back(p->shape());
  if (state.v.size() != params.size()) throw ShapeError("rmsprop: accumulator count differs from parameters");
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& w = *params[t];
    const Tensor& g = grads[t];
    Tensor& v = state.v[t];
    if (w.shape() != g.shape() || w.shape() != v.shape()) throw ShapeError("rmsprop: tensor shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = state.rho * v[i] + (1.0f - state.rho) * g[i] * g[i];
      w[i] -= state.lr * g[i] / (std::sqrt(v[i]) + state.eps);
    }
  }
}

}  // namespace kneeflex
