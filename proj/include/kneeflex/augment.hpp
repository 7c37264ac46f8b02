#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "kneeflex/image.hpp"
#include "kneeflex/keypoints.hpp"
#include "kneeflex/rng.hpp"

namespace kneeflex {

inline constexpr int kMaxShiftX = 20;
inline constexpr int kMinShiftY = -10;
inline constexpr int kMaxShiftY = 30;
inline constexpr double kMaxRotationDeg = 30.0;
inline constexpr double kFlipProbability = 0.5;
inline constexpr int kPlanRetries = 10;

/// Rotation center of the pixel grid.
inline constexpr double kRasterCenterX = (kFrameWidth - 1) / 2.0;
inline constexpr double kRasterCenterY = (kFrameHeight - 1) / 2.0;

/// Opaque, pre-blurred 200x150 background rasters.
struct BackgroundPool {
  std::vector<ImageRGBA> images;
  std::size_t source_count = 0;

  bool empty() const { return images.empty(); }
  std::size_t size() const { return images.size(); }
};

/// Which augmentation techniques are active.
struct Scenario {
  int id = 1;
  bool flip = false;
  bool translate = false;
  bool rotate = false;
  bool background = false;

  /// Scenario table: 1 none, 2 flips, 3 translations, 4 backgrounds, 5 rotations,
  /// 6 flips+translations, 7 flips+translations+rotations, 8 all four.
  static Scenario from_id(int id);

  bool any() const { return flip || translate || rotate || background; }
};

struct AugmentPlan {
  bool flip = false;
  int dx = 0;
  int dy = 0;
  double alpha_deg = 0.0;
  std::optional<std::size_t> background;

  bool is_identity() const { return !flip && dx == 0 && dy == 0 && alpha_deg == 0.0 && !background; }
  void validate() const;
};

/// Loads every decodable image in `dir`, center-crops to 4:3, resizes to
/// 200x150, blurs with a Gaussian of std `sigma`, and drops alpha.
/// Undecodable files are skipped with a warning; throws ConfigError if
/// nothing usable remains.
BackgroundPool prepare_backgrounds(const std::filesystem::path& dir, double sigma = 2.0);

/// Same pipeline applied to one in-memory image.
ImageRGBA prepare_background(const ImageRGBA& src, double sigma = 2.0);

/// Mirror about the vertical axis; x -> W-1-x and the thigh/leg labels swap.
Sample hflip(const Sample& s);
KeypointLabel hflip_label(const KeypointLabel& k, int width = kFrameWidth);

/// Integer shift, positive dy moves content down. Vacated pixels are transparent.
Sample translate(const Sample& s, int dx, int dy);

/// Rotation about (99.5, 74.5); positive angles turn clockwise on screen.
/// Bilinear sampling on premultiplied colour, transparent fill.
Sample rotate(const Sample& s, double alpha_deg);
Point2 rotate_point(Point2 p, double alpha_deg);

/// Alpha-over onto an opaque background; result is fully opaque.
Sample composite_background(const Sample& s, const ImageRGBA& background);

/// Label after the geometric part of the plan (flip, translate, rotate).
KeypointLabel transform_label(const AugmentPlan& plan, const KeypointLabel& label);

/// Draws a plan for the scenario. Translation and rotation are redrawn up to
/// 10 times until the transformed labels stay in the raster; after that the
/// geometric offsets fall back to identity (flip is always label-safe).
AugmentPlan draw_plan(const Scenario& scenario, Rng& rng, const KeypointLabel& label,
                      std::size_t background_count = 0);

/// flip -> translate -> rotate -> background, skipping disabled steps.
Sample apply(const AugmentPlan& plan, const Sample& sample, const BackgroundPool* pool = nullptr);

}  // namespace kneeflex
