#include "kneeflex/goniometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "kneeflex/dataset.hpp"
#include "kneeflex/error.hpp"
#include "kneeflex/log.hpp"
#include "kneeflex/parallel.hpp"

namespace kneeflex {

namespace {

constexpr double kCoincidentPx = 1e-6;

// Stream tags for validation data; the training set uses stream 0.
constexpr std::uint64_t kValSingleStream = 101;
constexpr std::uint64_t kValVariedStream = 102;
constexpr std::uint64_t kValAugmentStream = 103;

void plot(ImageRGBA& img, long x, long y) {
  if (img.contains(static_cast<int>(x), static_cast<int>(y)))
    img.set(static_cast<int>(x), static_cast<int>(y), kAnnotationRed);
}

// Liang-Barsky clip of segment a-b to [0, W-1] x [0, H-1]; false if nothing remains.
bool clip_segment(Point2& a, Point2& b, int width, int height) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x, (width - 1) - a.x, a.y, (height - 1) - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0)
      t0 = std::max(t0, t);
    else
      t1 = std::min(t1, t);
    if (t0 > t1) return false;
  }
  const Point2 start{a.x + t0 * dx, a.y + t0 * dy};
  const Point2 end{a.x + t1 * dx, a.y + t1 * dy};
  a = start;
  b = end;
  return true;
}

void draw_segment(ImageRGBA& img, Point2 a, Point2 b) {
  if (!clip_segment(a, b, img.width, img.height)) return;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const long steps = std::max(1L, std::lround(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps);
    plot(img, std::lround(a.x + t * dx), std::lround(a.y + t * dy));
  }
}

void draw_marker(ImageRGBA& img, Point2 p) {
  if (!(p.x >= 0 && p.y >= 0 && p.x <= img.width - 1 && p.y <= img.height - 1)) return;
  const long cx = std::lround(p.x), cy = std::lround(p.y);
  for (long y = cy - kMarkerRadius; y <= cy + kMarkerRadius; ++y)
    for (long x = cx - kMarkerRadius; x <= cx + kMarkerRadius; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= kMarkerRadius * kMarkerRadius) plot(img, x, y);
}

std::vector<Sample> generate_subset(int n, bool both_legs, SkinMode skin, std::uint64_t stream,
                                    const ValidationSpec& spec, std::uint64_t seed, int threads) {
  if (n <= 0) return {};
  GenerateConfig g;
  g.n_samples = n;
  g.flexion_range = spec.flexion_range;
  g.max_offset_deg = spec.max_offset_deg;
  g.both_legs = both_legs;
  g.skin_mode = skin;
  g.seed = seed;
  g.stream = stream;
  g.threads = threads;
  return generate_samples(g);
}

}  // namespace

double flexion_angle(const KeypointLabel& k) {
  const double ux = k.thigh.x - k.knee.x, uy = k.thigh.y - k.knee.y;
  const double vx = k.leg.x - k.knee.x, vy = k.leg.y - k.knee.y;
  if (std::hypot(ux, uy) <= kCoincidentPx || std::hypot(vx, vy) <= kCoincidentPx)
    throw DomainError("knee coincides with another keypoint");
  // Interior angle at the knee; full extension is 180 degrees interior.
  const double interior = std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy);
  return 180.0 - interior * 180.0 / std::numbers::pi;
}

KeypointLabel predict(const Network& net, const ImageRGBA& image) {
  const auto& in = net.input_shape();
  if (in[0] != kFrameHeight || in[1] != kFrameWidth || in[2] != 3)
    throw ShapeError("network input does not match the 200x150 RGB frame");
  const ImageRGBA frame = image.is_frame() ? image : resize(image, kFrameWidth, kFrameHeight);
  const ImageRGBA* ptr = &frame;
  const Tensor out = net.predict(make_batch({&ptr, 1}));
  if (out.size() != 6) throw ShapeError("network must produce 6 outputs");
  return KeypointLabel::from_flat({out[0], out[1], out[2], out[3], out[4], out[5]});
}

ImageRGBA annotate(const ImageRGBA& image, const KeypointLabel& k) {
  ImageRGBA out = image;
  draw_segment(out, k.thigh, k.knee);
  draw_segment(out, k.knee, k.leg);
  for (const Point2& p : {k.thigh, k.knee, k.leg}) draw_marker(out, p);
  return out;
}

std::vector<Sample> build_validation(const ValidationSpec& spec, std::uint64_t seed, const BackgroundPool* backgrounds,
                                     int threads) {
  if (spec.synth_single < 0 || spec.synth_varied < 0) throw ConfigError("validation subset sizes must be >= 0");
  const Scenario scenario = Scenario::from_id(spec.scenario);
  std::vector<Sample> out =
      generate_subset(spec.synth_single, false, SkinMode::Original, kValSingleStream, spec, seed, threads);
  auto varied = generate_subset(spec.synth_varied, true, SkinMode::Varied, kValVariedStream, spec, seed, threads);
  std::move(varied.begin(), varied.end(), std::back_inserter(out));
  if (spec.real_dir) {
    auto real = load_dataset(*spec.real_dir);
    std::move(real.begin(), real.end(), std::back_inserter(out));
  }
  if (scenario.any()) {
    const std::size_t pool_size = backgrounds ? backgrounds->size() : 0;
    if (scenario.background && pool_size == 0)
      throw ConfigError("scenario " + std::to_string(spec.scenario) + " requires backgrounds");
    parallel_for(out.size(), threads, [&](std::size_t i) {
      Rng rng(derive_seed(seed, {kValAugmentStream, i}));
      out[i] = apply(draw_plan(scenario, rng, out[i].label, pool_size), out[i], backgrounds);
    });
  }
  return out;
}

ExperimentReport run_experiments(const ExperimentConfig& config, const EpochCallback& on_epoch) {
  for (int s : config.scenarios) Scenario::from_id(s);
  config.train.validate();
  const std::vector<Sample> training = generate_samples(config.training_set);

  std::optional<BackgroundPool> pool;
  if (config.backgrounds_dir) pool = prepare_backgrounds(*config.backgrounds_dir, config.background_sigma);

  ExperimentReport report;
  report.real_subset = config.validation.real_dir.has_value();
  for (int s : config.scenarios) {
    try {
      ValidationSpec vspec = config.validation;
      vspec.scenario = s;
      const BackgroundPool* bg = pool ? &*pool : nullptr;
      const auto validation = build_validation(vspec, config.train.seed, bg, config.train.threads);
      report.validation_size = validation.size();
      TrainConfig tc = config.train;
      tc.scenario = s;
      log::info("scenario " + std::to_string(s) + ": training on " + std::to_string(training.size()) +
                " samples, validating on " + std::to_string(validation.size()));
      TrainResult r = train(training, validation, tc, bg, on_epoch);
      report.rows.push_back({s, r.min_train_loss(), r.min_val_loss(), tc.epochs, tc.seed, r.history});
    } catch (const std::exception& e) {
      report.failures.push_back("scenario " + std::to_string(s) + ": " + e.what());
      log::warn(report.failures.back());
    }
  }
  return report;
}

std::string format_report_csv(const ExperimentReport& report) {
  std::string out = "scenario,min_train_loss,min_val_loss,epochs,seed\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%d,%llu\n", r.scenario, r.min_train_loss, r.min_val_loss, r.epochs,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

}  // namespace kneeflex
