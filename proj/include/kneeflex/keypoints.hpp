#pragma once

#include <array>
#include <cmath>

#include "kneeflex/image.hpp"

namespace kneeflex {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

/// Ordered (thigh, knee, leg) keypoints in pixel coordinates, top-left origin.
/// The flat layout matches the CSV columns thigh_x, thigh_y, knee_x, knee_y, leg_x, leg_y.
struct KeypointLabel {
  Point2 thigh;
  Point2 knee;
  Point2 leg;

  std::array<double, 6> flat() const { return {thigh.x, thigh.y, knee.x, knee.y, leg.x, leg.y}; }
  static KeypointLabel from_flat(const std::array<double, 6>& v) {
    return {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}};
  }

  /// Round half-up to integer pixels, as stored in labels.csv.
  KeypointLabel rounded() const {
    auto r = [](double v) { return std::floor(v + 0.5); };
    return {{r(thigh.x), r(thigh.y)}, {r(knee.x), r(knee.y)}, {r(leg.x), r(leg.y)}};
  }

  bool operator==(const KeypointLabel&) const = default;
};

/// True when every keypoint lies on the pixel grid [0, W-1] x [0, H-1].
inline bool in_raster(const KeypointLabel& k, int width = kFrameWidth, int height = kFrameHeight) {
  for (const Point2& p : {k.thigh, k.knee, k.leg})
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1)) return false;
  return true;
}

/// Image paired with its keypoint label; the unit flowing through augmentation and training.
struct Sample {
  ImageRGBA image;
  KeypointLabel label;
};

}  // namespace kneeflex
