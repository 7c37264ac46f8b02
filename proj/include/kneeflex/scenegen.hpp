#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "kneeflex/image.hpp"
#include "kneeflex/keypoints.hpp"
#include "kneeflex/rng.hpp"

namespace kneeflex {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const;
  Vec3 normalized() const;
};

inline constexpr double kMaxKneeFlexionDeg = 140.0;

/// Knee flexion with the hip slaved at half of it, so the heel stays on the table.
class LegPose {
 public:
  /// Throws ConfigError outside [0, 140] degrees.
  static LegPose from_knee(double knee_flexion_deg);

  double knee_flexion_deg() const { return knee_; }
  double hip_flexion_deg() const { return knee_ / 2.0; }

 private:
  explicit LegPose(double knee) : knee_(knee) {}
  double knee_;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Skin tones; index 0 is the "original" texture.
const std::vector<Rgb>& skin_palette();

struct BodyConfig {
  double thigh_length = 0.45;
  double shank_length = 0.45;
  double thigh_radius = 0.075;
  double shank_radius = 0.055;
  int skin_tone = 0;
  bool both_legs = false;
  /// Depth of the resting leg behind the flexed one, away from the camera.
  double rest_leg_offset = 0.25;

  void validate() const;
};

struct Joints {
  Vec3 hip;
  Vec3 knee;
  Vec3 ankle;
};

struct JointPositions {
  Joints flexed;
  std::optional<Joints> resting;
};

/// Pinhole camera aimed at `look_at`. Offsets rotate the viewing direction
/// away from the leg-plane normal (yaw about the vertical, pitch about the table axis).
struct CameraPose {
  double yaw_offset_deg = 0.0;
  double pitch_offset_deg = 0.0;
  double distance = 3.0;
  double focal = 500.0;
  Vec3 look_at;
};

struct FlexionRange {
  double lo = 0.0;
  double hi = kMaxKneeFlexionDeg;

  void validate() const;
};

LegPose sample_pose(Rng& rng, FlexionRange range);

/// Hip at the origin on the table line (y = 0), leg plane z = 0, thigh pointing
/// toward +x and lifted by the hip flexion. The resting leg, when enabled, lies
/// straight on the table at z = -rest_leg_offset.
JointPositions leg_world_geometry(const LegPose& pose, const BodyConfig& body);

Vec3 centroid(const Joints& j);

/// Camera looking at the flexed-leg centroid with yaw/pitch offsets drawn
/// uniformly from [-max_offset_deg, max_offset_deg].
CameraPose frame_camera(const JointPositions& joints, Rng& rng, double max_offset_deg);

/// Perspective projection to pixel coordinates; look_at maps to (100, 75).
/// Throws ProjectionError for points at or behind the camera plane.
Point2 project(const Vec3& point, const CameraPose& camera);

/// Ray-traced capsule limbs with Lambertian shading from an overhead light.
/// Background pixels are fully transparent, leg pixels fully opaque.
ImageRGBA render_scene(const LegPose& pose, const BodyConfig& body, const CameraPose& camera);

/// Projections of the thigh midpoint, the knee joint, and the shank midpoint.
KeypointLabel compute_keypoints(const LegPose& pose, const BodyConfig& body, const CameraPose& camera);

enum class RelativeOrigin { BottomLeft, TopLeft };

/// Scales relative [0,1] coordinates to pixels with a top-left origin.
/// Throws ConfigError when u or v falls outside [0, 1].
Point2 relative_to_absolute(double u, double v, int width = kFrameWidth, int height = kFrameHeight,
                            RelativeOrigin origin = RelativeOrigin::BottomLeft);

enum class SkinMode { Original, Varied };

struct GenerateConfig {
  int n_samples = 1;
  FlexionRange flexion_range;
  double max_offset_deg = 10.0;
  double focal_px = 500.0;
  bool both_legs = false;
  SkinMode skin_mode = SkinMode::Original;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Stream selector so several datasets can share one master seed.
  std::uint64_t stream = 0;

  void validate() const;
};

inline constexpr int kFramingRetries = 10;

/// Generated sample plus the scene that produced it.
struct SceneSample {
  Sample sample;
  LegPose pose;
  BodyConfig body;
  CameraPose camera;
};

/// Deterministic in (config.seed, config.stream, index).
SceneSample generate_sample(const GenerateConfig& config, std::uint64_t index);

std::vector<Sample> generate_samples(const GenerateConfig& config);

/// Writes 0.png ... (n-1).png plus labels.csv into out_dir.
void generate_dataset(const GenerateConfig& config, const std::filesystem::path& out_dir);

}  // namespace kneeflex
