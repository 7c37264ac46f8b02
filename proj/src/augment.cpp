#include "kneeflex/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kneeflex/error.hpp"
#include "kneeflex/log.hpp"

namespace kneeflex {

Scenario Scenario::from_id(int id) {
  Scenario s;
  s.id = id;
  switch (id) {
    case 1: break;
    case 2: s.flip = true; break;
    case 3: s.translate = true; break;
    case 4: s.background = true; break;
    case 5: s.rotate = true; break;
    case 6: s.flip = s.translate = true; break;
    case 7: s.flip = s.translate = s.rotate = true; break;
    case 8: s.flip = s.translate = s.rotate = s.background = true; break;
    default: throw ConfigError("scenario must be in 1..8, got " + std::to_string(id));
  }
  return s;
}

void AugmentPlan::validate() const {
  if (dx < -kMaxShiftX || dx > kMaxShiftX) throw ConfigError("dx outside [-20, 20]");
  if (dy < kMinShiftY || dy > kMaxShiftY) throw ConfigError("dy outside [-10, 30]");
  if (!(std::abs(alpha_deg) <= kMaxRotationDeg)) throw ConfigError("rotation outside [-30, 30] degrees");
}

// --- backgrounds ----------------------------------------------------------

ImageRGBA prepare_background(const ImageRGBA& src, double sigma) {
  ImageRGBA img = resize(center_crop_to_aspect(src, kFrameWidth, kFrameHeight), kFrameWidth, kFrameHeight);
  for (std::size_t i = 3; i < img.pixels.size(); i += 4) img.pixels[i] = 255;
  return gaussian_blur(img, sigma);
}

BackgroundPool prepare_backgrounds(const std::filesystem::path& dir, double sigma) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw ConfigError("background directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("background directory is empty: " + dir.string());

  BackgroundPool pool;
  pool.source_count = files.size();
  for (const auto& f : files) {
    try {
      pool.images.push_back(prepare_background(read_image(f), sigma));
    } catch (const std::exception& e) {
      log::warn("skipping background " + f.string() + ": " + e.what());
    }
  }
  if (pool.empty()) throw ConfigError("no decodable backgrounds in " + dir.string());
  return pool;
}

// --- geometric transforms -------------------------------------------------

KeypointLabel hflip_label(const KeypointLabel& k, int width) {
  auto mirror = [width](Point2 p) { return Point2{(width - 1) - p.x, p.y}; };
  return {mirror(k.leg), mirror(k.knee), mirror(k.thigh)};
}

Sample hflip(const Sample& s) {
  Sample out{ImageRGBA(s.image.width, s.image.height), hflip_label(s.label, s.image.width)};
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < s.image.width; ++x) std::copy_n(s.image.at(s.image.width - 1 - x, y), 4, out.image.at(x, y));
  return out;
}

Sample translate(const Sample& s, int dx, int dy) {
  if (dx == 0 && dy == 0) return s;
  Sample out{ImageRGBA(s.image.width, s.image.height), s.label};
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < s.image.width; ++x)
      if (s.image.contains(x - dx, y - dy)) std::copy_n(s.image.at(x - dx, y - dy), 4, out.image.at(x, y));
  for (Point2* p : {&out.label.thigh, &out.label.knee, &out.label.leg}) {
    p->x += dx;
    p->y += dy;
  }
  return out;
}

Point2 rotate_point(Point2 p, double alpha_deg) {
  const double a = alpha_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  const double rx = p.x - kRasterCenterX, ry = p.y - kRasterCenterY;
  return {kRasterCenterX + c * rx - s * ry, kRasterCenterY + s * rx + c * ry};
}

Sample rotate(const Sample& s, double alpha_deg) {
  if (alpha_deg == 0.0) return s;
  const ImageRGBA& src = s.image;
  Sample out{ImageRGBA(src.width, src.height),
             {rotate_point(s.label.thigh, alpha_deg), rotate_point(s.label.knee, alpha_deg),
              rotate_point(s.label.leg, alpha_deg)}};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const Point2 p = rotate_point({static_cast<double>(x), static_cast<double>(y)}, -alpha_deg);
      const int x0 = static_cast<int>(std::floor(p.x));
      const int y0 = static_cast<int>(std::floor(p.y));
      const double fx = p.x - x0, fy = p.y - y0;
      double premult[3] = {0, 0, 0};
      double alpha = 0.0;
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          if (!src.contains(x0 + i, y0 + j)) continue;
          const double w = (i ? fx : 1.0 - fx) * (j ? fy : 1.0 - fy);
          const std::uint8_t* px = src.at(x0 + i, y0 + j);
          const double a = w * px[3];
          alpha += a;
          for (int c = 0; c < 3; ++c) premult[c] += a * px[c];
        }
      const long a8 = std::clamp(std::lround(alpha), 0L, 255L);
      if (a8 == 0) continue;
      std::uint8_t* dst = out.image.at(x, y);
      for (int c = 0; c < 3; ++c) dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(premult[c] / alpha), 0L, 255L));
      dst[3] = static_cast<std::uint8_t>(a8);
    }
  }
  return out;
}

Sample composite_background(const Sample& s, const ImageRGBA& background) {
  if (background.width != s.image.width || background.height != s.image.height)
    throw ShapeError("background size does not match sample");
  Sample out{ImageRGBA(s.image.width, s.image.height), s.label};
  for (std::size_t i = 0; i < out.image.pixels.size(); i += 4) {
    const double a = s.image.pixels[i + 3] / 255.0;
    for (int c = 0; c < 3; ++c) {
      const double v = s.image.pixels[i + c] * a + background.pixels[i + c] * (1.0 - a);
      out.image.pixels[i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    out.image.pixels[i + 3] = 255;
  }
  return out;
}

// --- plans ----------------------------------------------------------------

KeypointLabel transform_label(const AugmentPlan& plan, const KeypointLabel& label) {
  KeypointLabel k = plan.flip ? hflip_label(label) : label;
  for (Point2* p : {&k.thigh, &k.knee, &k.leg}) {
    p->x += plan.dx;
    p->y += plan.dy;
    if (plan.alpha_deg != 0.0) *p = rotate_point(*p, plan.alpha_deg);
  }
  return k;
}

AugmentPlan draw_plan(const Scenario& scenario, Rng& rng, const KeypointLabel& label, std::size_t background_count) {
  AugmentPlan plan;
  plan.flip = scenario.flip && rng.bernoulli(kFlipProbability);
  if (scenario.background) {
    if (background_count == 0) throw ConfigError("scenario requires backgrounds but the pool is empty");
    plan.background = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(background_count) - 1));
  }
  if (!scenario.translate && !scenario.rotate) return plan;
  for (int attempt = 0; attempt < kPlanRetries; ++attempt) {
    if (scenario.translate) {
      plan.dx = rng.uniform_int(-kMaxShiftX, kMaxShiftX);
      plan.dy = rng.uniform_int(kMinShiftY, kMaxShiftY);
    }
    if (scenario.rotate) plan.alpha_deg = rng.uniform(-kMaxRotationDeg, kMaxRotationDeg);
    if (in_raster(transform_label(plan, label))) return plan;
  }
  log::warn("augmentation: labels left the raster after 10 draws; using identity geometry");
  plan.dx = plan.dy = 0;
  plan.alpha_deg = 0.0;
  return plan;
}

Sample apply(const AugmentPlan& plan, const Sample& sample, const BackgroundPool* pool) {
  plan.validate();
  Sample out = plan.flip ? hflip(sample) : sample;
  out = translate(out, plan.dx, plan.dy);
  out = rotate(out, plan.alpha_deg);
  if (plan.background) {
    if (!pool || *plan.background >= pool->size()) throw ConfigError("background index outside the pool");
    out = composite_background(out, pool->images[*plan.background]);
  }
  return out;
}

}  // namespace kneeflex
