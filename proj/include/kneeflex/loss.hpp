#pragma once

#include <array>
#include <span>

namespace kneeflex {

/// Per-point distances below this get a zero gradient.
inline constexpr double kLossGradGuard = 1e-8;

/// Total Euclidean distance over the three keypoints, in pixels.
/// Both vectors are ordered (thigh_x, thigh_y, knee_x, knee_y, leg_x, leg_y).
double euclid_loss(std::span<const float, 6> pred, std::span<const float, 6> label);
double euclid_loss(const std::array<double, 6>& pred, const std::array<double, 6>& label);

/// d loss / d pred. A pair whose distance is below kLossGradGuard contributes zero.
std::array<double, 6> euclid_loss_grad(const std::array<double, 6>& pred, const std::array<double, 6>& label);

/// Per-point Euclidean distances (thigh, knee, leg).
std::array<double, 3> point_distances(const std::array<double, 6>& pred, const std::array<double, 6>& label);

}  // namespace kneeflex
