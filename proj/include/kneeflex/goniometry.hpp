#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kneeflex/augment.hpp"
#include "kneeflex/keypoints.hpp"
#include "kneeflex/network.hpp"
#include "kneeflex/scenegen.hpp"
#include "kneeflex/trainer.hpp"

namespace kneeflex {

/// Knee flexion in degrees: 0 at full extension (thigh, knee, leg collinear
/// with the knee in between), growing with bend, unsigned.
/// Throws DomainError when the knee coincides with either other point.
double flexion_angle(const KeypointLabel& k);

/// Runs the network on an image of any size (resized to 200x150) and decodes
/// the six outputs in CSV column order. Predictions are not clamped.
KeypointLabel predict(const Network& net, const ImageRGBA& image);

inline constexpr Rgba kAnnotationRed = {255, 0, 0, 255};
inline constexpr int kMarkerRadius = 2;

/// Copy of `image` with a red thigh-knee-leg polyline and point markers.
/// Segments are clipped to the raster; off-frame markers are skipped.
ImageRGBA annotate(const ImageRGBA& image, const KeypointLabel& k);

struct ValidationSpec {
  int synth_single = 25;   // original skin, one leg
  int synth_varied = 425;  // varied skin, both legs
  std::optional<std::filesystem::path> real_dir;  // labels.csv + <index>.png
  int scenario = 1;
  FlexionRange flexion_range;
  double max_offset_deg = 10.0;
};

/// Synthetic subsets generated from `seed`, real photos appended, then one
/// augmentation plan per sample for the scenario (fixed for the run).
std::vector<Sample> build_validation(const ValidationSpec& spec, std::uint64_t seed,
                                     const BackgroundPool* backgrounds = nullptr, int threads = 1);

struct ExperimentConfig {
  std::vector<int> scenarios = {1, 2, 3, 4, 5, 6, 7, 8};
  GenerateConfig training_set;  // generated once and shared by every scenario
  TrainConfig train;            // scenario field is overridden per run
  ValidationSpec validation;
  std::optional<std::filesystem::path> backgrounds_dir;
  double background_sigma = 2.0;
};

struct ScenarioResult {
  int scenario = 0;
  double min_train_loss = 0.0;
  double min_val_loss = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
  std::vector<EpochStats> history;
};

struct ExperimentReport {
  std::vector<ScenarioResult> rows;
  std::vector<std::string> failures;  // "scenario N: message"
  std::size_t validation_size = 0;
  bool real_subset = false;
};

/// Trains one fresh Eva per scenario on a shared generated training set.
/// A failure in one scenario is recorded and does not stop the others.
ExperimentReport run_experiments(const ExperimentConfig& config, const EpochCallback& on_epoch = {});

/// `scenario,min_train_loss,min_val_loss,epochs,seed` with six decimals.
std::string format_report_csv(const ExperimentReport& report);

/// `img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y,angle_deg` header for prediction output.
inline constexpr const char* kPredictionsHeader = "img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y,angle_deg";

}  // namespace kneeflex
