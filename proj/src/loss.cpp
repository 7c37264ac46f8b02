#include "kneeflex/loss.hpp"

#include <cmath>

namespace kneeflex {

std::array<double, 3> point_distances(const std::array<double, 6>& pred, const std::array<double, 6>& label) {
  std::array<double, 3> d{};
  for (int i = 0; i < 3; ++i) d[i] = std::hypot(pred[2 * i] - label[2 * i], pred[2 * i + 1] - label[2 * i + 1]);
  return d;
}

double euclid_loss(const std::array<double, 6>& pred, const std::array<double, 6>& label) {
  const auto d = point_distances(pred, label);
  return d[0] + d[1] + d[2];
}

double euclid_loss(std::span<const float, 6> pred, std::span<const float, 6> label) {
  std::array<double, 6> p{}, l{};
  for (int i = 0; i < 6; ++i) {
    p[i] = pred[i];
    l[i] = label[i];
  }
  return euclid_loss(p, l);
}

std::array<double, 6> euclid_loss_grad(const std::array<double, 6>& pred, const std::array<double, 6>& label) {
  std::array<double, 6> g{};
  const auto d = point_distances(pred, label);
  for (int i = 0; i < 3; ++i) {
    if (d[i] < kLossGradGuard) continue;
    g[2 * i] = (pred[2 * i] - label[2 * i]) / d[i];
    g[2 * i + 1] = (pred[2 * i + 1] - label[2 * i + 1]) / d[i];
  }
  return g;
}

}  // namespace kneeflex
