#include "kneeflex/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kneeflex/dataset.hpp"
#include "kneeflex/error.hpp"
#include "kneeflex/parallel.hpp"

namespace kneeflex {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kPrincipalX = kFrameWidth / 2.0;
constexpr double kPrincipalY = kFrameHeight / 2.0;

// Direction toward the light: overhead, tilted slightly toward the camera side.
const Vec3 kLightDir = Vec3{0.0, 1.0, 0.35}.normalized();
constexpr double kAmbient = 0.35;

struct CameraFrame {
  Vec3 position;
  Vec3 right;
  Vec3 up;
  Vec3 forward;
};

CameraFrame camera_frame(const CameraPose& cam) {
  const double yaw = cam.yaw_offset_deg * kDegToRad;
  const double pitch = cam.pitch_offset_deg * kDegToRad;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  // R = Ry(yaw) * Rx(pitch), columns are the camera axes.
  const Vec3 right{cy, 0.0, -sy};
  const Vec3 up{sy * sp, cp, cy * sp};
  const Vec3 back{sy * cp, -sp, cy * cp};
  return {cam.look_at + back * cam.distance, right, up, back * -1.0};
}

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius;
};

// Nearest positive ray parameter hitting the capsule, or -1. `rd` is unit length.
double intersect_capsule(const Vec3& ro, const Vec3& rd, const Capsule& cap) {
  const Vec3 ba = cap.b - cap.a;
  const Vec3 oa = ro - cap.a;
  const double baba = ba.dot(ba);
  const double bard = ba.dot(rd);
  const double baoa = ba.dot(oa);
  const double rdoa = rd.dot(oa);
  const double oaoa = oa.dot(oa);
  const double r2 = cap.radius * cap.radius;
  const double a = baba - bard * bard;
  const double b = baba * rdoa - baoa * bard;
  const double c = baba * oaoa - baoa * baoa - r2 * baba;
  double h = b * b - a * c;
  if (h < 0.0) return -1.0;
  if (a > 1e-12) {
    const double t = (-b - std::sqrt(h)) / a;
    const double y = baoa + t * bard;
    if (y > 0.0 && y < baba && t > 0.0) return t;
  }
  // Spherical caps.
  double best = -1.0;
  for (const Vec3& center : {cap.a, cap.b}) {
    const Vec3 oc = ro - center;
    const double bb = rd.dot(oc);
    const double cc = oc.dot(oc) - r2;
    h = bb * bb - cc;
    if (h <= 0.0) continue;
    const double t = -bb - std::sqrt(h);
    if (t > 0.0 && (best < 0.0 || t < best)) best = t;
  }
  return best;
}

Vec3 capsule_normal(const Vec3& p, const Capsule& cap) {
  const Vec3 ba = cap.b - cap.a;
  const double t = std::clamp((p - cap.a).dot(ba) / ba.dot(ba), 0.0, 1.0);
  return (p - (cap.a + ba * t)).normalized();
}

Joints leg_joints(const Vec3& hip, double hip_deg, double knee_deg, const BodyConfig& body) {
  const double thigh_angle = hip_deg * kDegToRad;
  const double shank_angle = (hip_deg - knee_deg) * kDegToRad;
  const Vec3 knee = hip + Vec3{std::cos(thigh_angle), std::sin(thigh_angle), 0.0} * body.thigh_length;
  const Vec3 ankle = knee + Vec3{std::cos(shank_angle), std::sin(shank_angle), 0.0} * body.shank_length;
  return {hip, knee, ankle};
}

}  // namespace

double Vec3::norm() const { return std::sqrt(dot(*this)); }

Vec3 Vec3::normalized() const {
  const double n = norm();
  return n > 0.0 ? *this * (1.0 / n) : *this;
}

LegPose LegPose::from_knee(double knee_flexion_deg) {
  if (!(knee_flexion_deg >= 0.0 && knee_flexion_deg <= kMaxKneeFlexionDeg))
    throw ConfigError("knee flexion must lie in [0, 140] degrees, got " + std::to_string(knee_flexion_deg));
  return LegPose(knee_flexion_deg);
}

const std::vector<Rgb>& skin_palette() {
  static const std::vector<Rgb> palette = {
      {224, 172, 142},  // original
      {241, 194, 160},
      {198, 134, 96},
      {161, 102, 68},
      {112, 70, 44},
      {236, 188, 180},
  };
  return palette;
}

void BodyConfig::validate() const {
  if (!(thigh_length > 0 && shank_length > 0 && thigh_radius > 0 && shank_radius > 0))
    throw ConfigError("body lengths and radii must be positive");
  if (skin_tone < 0 || skin_tone >= static_cast<int>(skin_palette().size()))
    throw ConfigError("skin tone index out of range");
  if (both_legs && !(rest_leg_offset > 0)) throw ConfigError("rest leg offset must be positive");
}

void FlexionRange::validate() const {
  if (!(lo >= 0.0 && lo <= hi && hi <= kMaxKneeFlexionDeg))
    throw ConfigError("flexion range must satisfy 0 <= lo <= hi <= 140");
}

LegPose sample_pose(Rng& rng, FlexionRange range) {
  range.validate();
  return LegPose::from_knee(range.lo == range.hi ? range.lo : rng.uniform(range.lo, range.hi));
}

JointPositions leg_world_geometry(const LegPose& pose, const BodyConfig& body) {
  JointPositions out;
  out.flexed = leg_joints({0.0, 0.0, 0.0}, pose.hip_flexion_deg(), pose.knee_flexion_deg(), body);
  if (body.both_legs) out.resting = leg_joints({0.0, 0.0, -body.rest_leg_offset}, 0.0, 0.0, body);
  return out;
}

Vec3 centroid(const Joints& j) { return (j.hip + j.knee + j.ankle) * (1.0 / 3.0); }

CameraPose frame_camera(const JointPositions& joints, Rng& rng, double max_offset_deg) {
  if (!(max_offset_deg >= 0.0)) throw ConfigError("max camera offset must be non-negative");
  CameraPose cam;
  cam.look_at = centroid(joints.flexed);
  if (max_offset_deg > 0.0) {
    cam.yaw_offset_deg = rng.uniform(-max_offset_deg, max_offset_deg);
    cam.pitch_offset_deg = rng.uniform(-max_offset_deg, max_offset_deg);
  }
  return cam;
}

Point2 project(const Vec3& point, const CameraPose& camera) {
  const CameraFrame f = camera_frame(camera);
  const Vec3 rel = point - f.position;
  const double depth = rel.dot(f.forward);
  if (!(depth > 1e-9)) throw ProjectionError("point at or behind the camera plane");
  return {kPrincipalX + camera.focal * rel.dot(f.right) / depth, kPrincipalY - camera.focal * rel.dot(f.up) / depth};
}

ImageRGBA render_scene(const LegPose& pose, const BodyConfig& body, const CameraPose& camera) {
  body.validate();
  const JointPositions joints = leg_world_geometry(pose, body);
  std::vector<Capsule> capsules = {
      {joints.flexed.hip, joints.flexed.knee, body.thigh_radius},
      {joints.flexed.knee, joints.flexed.ankle, body.shank_radius},
  };
  if (joints.resting) {
    capsules.push_back({joints.resting->hip, joints.resting->knee, body.thigh_radius});
    capsules.push_back({joints.resting->knee, joints.resting->ankle, body.shank_radius});
  }
  const Rgb tone = skin_palette()[static_cast<std::size_t>(body.skin_tone)];
  const CameraFrame f = camera_frame(camera);

  ImageRGBA img = ImageRGBA::frame();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double cx = (x - kPrincipalX) / camera.focal;
      const double cy = -(y - kPrincipalY) / camera.focal;
      const Vec3 rd = (f.right * cx + f.up * cy + f.forward).normalized();
      double best_t = -1.0;
      const Capsule* hit = nullptr;
      for (const auto& cap : capsules) {
        const double t = intersect_capsule(f.position, rd, cap);
        if (t > 0.0 && (best_t < 0.0 || t < best_t)) {
          best_t = t;
          hit = &cap;
        }
      }
      if (!hit) continue;
      const Vec3 n = capsule_normal(f.position + rd * best_t, *hit);
      const double shade = kAmbient + (1.0 - kAmbient) * std::max(0.0, n.dot(kLightDir));
      auto channel = [&](std::uint8_t c) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(c * shade), 0L, 255L));
      };
      img.set(x, y, {channel(tone[0]), channel(tone[1]), channel(tone[2]), 255});
    }
  }
  return img;
}

KeypointLabel compute_keypoints(const LegPose& pose, const BodyConfig& body, const CameraPose& camera) {
  const Joints j = leg_world_geometry(pose, body).flexed;
  return {project((j.hip + j.knee) * 0.5, camera), project(j.knee, camera), project((j.knee + j.ankle) * 0.5, camera)};
}

Point2 relative_to_absolute(double u, double v, int width, int height, RelativeOrigin origin) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw ConfigError("relative coordinates must lie in [0, 1]");
  const double y = origin == RelativeOrigin::BottomLeft ? (1.0 - v) * height : v * height;
  return {u * width, y};
}

void GenerateConfig::validate() const {
  if (n_samples < 1) throw ConfigError("number of samples must be at least 1");
  flexion_range.validate();
  if (!(max_offset_deg >= 0.0)) throw ConfigError("max camera offset must be non-negative");
  if (!(focal_px > 0.0)) throw ConfigError("focal length must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

SceneSample generate_sample(const GenerateConfig& config, std::uint64_t index) {
  Rng rng(derive_seed(config.seed, {config.stream, index}));
  const LegPose pose = sample_pose(rng, config.flexion_range);
  BodyConfig body;
  body.both_legs = config.both_legs;
  if (config.skin_mode == SkinMode::Varied)
    body.skin_tone = rng.uniform_int(0, static_cast<int>(skin_palette().size()) - 1);
  const JointPositions joints = leg_world_geometry(pose, body);
  for (int attempt = 0; attempt < kFramingRetries; ++attempt) {
    CameraPose camera = frame_camera(joints, rng, config.max_offset_deg);
    camera.focal = config.focal_px;
    const KeypointLabel label = compute_keypoints(pose, body, camera);
    if (!in_raster(label)) continue;
    return {{render_scene(pose, body, camera), label}, pose, body, camera};
  }
  throw FramingError("sample " + std::to_string(index) + ": keypoints left the frame after " +
                     std::to_string(kFramingRetries) + " camera draws");
}

std::vector<Sample> generate_samples(const GenerateConfig& config) {
  config.validate();
  std::vector<Sample> out(static_cast<std::size_t>(config.n_samples));
  parallel_for(out.size(), config.threads,
               [&](std::size_t i) { out[i] = generate_sample(config, i).sample; });
  return out;
}

void generate_dataset(const GenerateConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  // Generate in fixed-size chunks so memory stays bounded; writes happen in index order.
  constexpr std::size_t kChunk = 256;
  const auto n = static_cast<std::size_t>(config.n_samples);
  std::vector<DatasetRecord> records;
  records.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t count = std::min(kChunk, n - begin);
    std::vector<Sample> chunk(count);
    parallel_for(count, config.threads, [&](std::size_t i) { chunk[i] = generate_sample(config, begin + i).sample; });
    for (std::size_t i = 0; i < count; ++i) {
      const auto index = static_cast<long>(begin + i);
      write_png(out_dir / (std::to_string(index) + ".png"), chunk[i].image);
      records.push_back({index, chunk[i].label.rounded()});
    }
  }
  write_labels_csv(out_dir / kLabelsFile, records);
}

}  // namespace kneeflex
