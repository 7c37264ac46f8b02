#include <gtest/gtest.h>

#include <cmath>

#include "kneeflex/augment.hpp"
#include "kneeflex/error.hpp"
#include "kneeflex/scenegen.hpp"
#include "support/oracles.hpp"

using namespace kneeflex;
using kneeflex::testing::detect_marker;
using kneeflex::testing::Rgb3;

namespace {

const KeypointLabel kRow0{{62, 74}, {98, 71}, {137, 73}};

Sample gradient_sample() {
  Sample s{ImageRGBA::frame(), kRow0};
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < s.image.width; ++x)
      s.image.set(x, y, {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), static_cast<std::uint8_t>(x ^ y),
                         static_cast<std::uint8_t>((x * 7 + y) % 3 ? 255 : 0)});
  return s;
}

void paint_dot(ImageRGBA& img, Point2 c, Rgb3 color) {
  const int cx = static_cast<int>(c.x), cy = static_cast<int>(c.y);
  for (int y = cy - 2; y <= cy + 2; ++y)
    for (int x = cx - 2; x <= cx + 2; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= 4 && img.contains(x, y))
        img.set(x, y, {color[0], color[1], color[2], 255});
}

}  // namespace

TEST(Scenario, TechniqueTable) {
  const bool expected[8][4] = {{0, 0, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1},
                               {0, 0, 1, 0}, {1, 1, 0, 0}, {1, 1, 1, 0}, {1, 1, 1, 1}};
  for (int id = 1; id <= 8; ++id) {
    const auto s = Scenario::from_id(id);
    EXPECT_EQ(s.flip, expected[id - 1][0]) << id;
    EXPECT_EQ(s.translate, expected[id - 1][1]) << id;
    EXPECT_EQ(s.rotate, expected[id - 1][2]) << id;
    EXPECT_EQ(s.background, expected[id - 1][3]) << id;
  }
  EXPECT_THROW(Scenario::from_id(0), ConfigError);
  EXPECT_THROW(Scenario::from_id(9), ConfigError);
}

TEST(HFlip, DatasetRowZeroSwap) {
  const auto k = hflip_label(kRow0);
  EXPECT_EQ(k, (KeypointLabel{{62, 73}, {101, 71}, {137, 74}}));
}

TEST(HFlip, InvolutionBitExact) {
  const auto s = gradient_sample();
  const auto twice = hflip(hflip(s));
  EXPECT_EQ(twice.image, s.image);
  EXPECT_EQ(twice.label, s.label);
  const auto once = hflip(s);
  EXPECT_EQ(once.image.get(0, 10), s.image.get(199, 10));
}

TEST(HFlip, SymmetricSilhouetteKeepsPixels) {
  Sample s{ImageRGBA::frame(), {{50, 75}, {99.5, 60}, {149, 75}}};
  for (int y = 60; y < 90; ++y)
    for (int x = 40; x < 160; ++x) s.image.set(x, y, {200, 150, 100, 255});
  const auto f = hflip(s);
  EXPECT_EQ(f.image, s.image);
  EXPECT_EQ(f.label, s.label);
}

TEST(Translate, IdentityAndLabelShift) {
  const auto s = gradient_sample();
  const auto same = translate(s, 0, 0);
  EXPECT_EQ(same.image, s.image);
  EXPECT_EQ(same.label, s.label);

  const auto t = translate(s, 10, -5);
  EXPECT_EQ(t.label.knee, (Point2{108, 66}));
  EXPECT_EQ(t.image.get(50, 50), s.image.get(40, 55));
  EXPECT_EQ(t.image.get(5, 50)[3], 0);
  EXPECT_EQ(t.image.get(50, 147)[3], 0);
}

TEST(Translate, OffRasterPlanIsResampled) {
  Scenario sc = Scenario::from_id(3);
  const KeypointLabel k{{150, 75}, {170, 70}, {185, 75}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto plan = draw_plan(sc, rng, k);
    EXPECT_TRUE(in_raster(transform_label(plan, k)));
    EXPECT_LE(plan.dx, 14);
  }
  EXPECT_FALSE(in_raster(transform_label(AugmentPlan{false, 20, 0, 0.0, {}}, k)));
}

TEST(Rotate, ZeroIsExactIdentity) {
  const auto s = gradient_sample();
  const auto r = rotate(s, 0.0);
  EXPECT_EQ(r.image, s.image);
  EXPECT_EQ(r.label, s.label);
}

TEST(Rotate, NinetyDegreesClockwiseOnScreen) {
  for (double r : {5.0, 20.0, 40.0}) {
    const auto p = rotate_point({99.5 + r, 74.5}, 90.0);
    EXPECT_NEAR(p.x, 99.5, 1e-9);
    EXPECT_NEAR(p.y, 74.5 + r, 1e-9);
  }
}

TEST(Rotate, ImageFollowsLabel) {
  Sample s{ImageRGBA::frame(), {{120, 74.5}, {99.5, 74.5}, {80, 74.5}}};
  paint_dot(s.image, {120, 75}, {255, 0, 0});
  const auto r = rotate(s, 90.0);
  const auto found = detect_marker(r.image, {255, 0, 0});
  ASSERT_TRUE(found);
  EXPECT_NEAR(found->x, r.label.thigh.x, 1.0);
  EXPECT_NEAR(found->y, r.label.thigh.y, 1.0);
}

TEST(Composite, AlphaOverArithmetic) {
  const ImageRGBA bg(200, 150, {100, 100, 100, 255});
  Sample s{ImageRGBA::frame(), kRow0};
  s.image.set(0, 0, {200, 200, 200, 128});
  s.image.set(1, 0, {17, 33, 250, 255});
  const auto out = composite_background(s, bg);
  // 200 * 128/255 + 100 * 127/255 = 150.2
  EXPECT_EQ(out.image.get(0, 0), (Rgba{150, 150, 150, 255}));
  EXPECT_EQ(out.image.get(1, 0), (Rgba{17, 33, 250, 255}));
  EXPECT_EQ(out.image.get(5, 5), (Rgba{100, 100, 100, 255}));
  EXPECT_THROW(composite_background(s, ImageRGBA(10, 10)), ShapeError);
}

TEST(Composite, TransparentSampleEqualsBackground) {
  ImageRGBA bg(200, 150);
  for (std::size_t i = 0; i < bg.pixels.size(); ++i) bg.pixels[i] = static_cast<std::uint8_t>(i * 31);
  for (std::size_t i = 3; i < bg.pixels.size(); i += 4) bg.pixels[i] = 255;
  EXPECT_EQ(composite_background({ImageRGBA::frame(), kRow0}, bg).image, bg);
}

TEST(DrawPlan, FlipRate) {
  Rng rng(2024);
  const auto sc = Scenario::from_id(2);
  int flips = 0;
  for (int i = 0; i < 10000; ++i) flips += draw_plan(sc, rng, kRow0).flip;
  EXPECT_GE(flips, 4700);
  EXPECT_LE(flips, 5300);
}

TEST(DrawPlan, RangesRespected) {
  Rng rng(5);
  const auto sc = Scenario::from_id(8);
  for (int i = 0; i < 2000; ++i) {
    const auto plan = draw_plan(sc, rng, kRow0, 3);
    plan.validate();
    ASSERT_TRUE(plan.background.has_value());
    ASSERT_LT(*plan.background, 3u);
  }
  Rng r2(5);
  EXPECT_THROW(draw_plan(sc, r2, kRow0, 0), ConfigError);
}

TEST(DrawPlan, FallsBackToIdentityGeometry) {
  // Labels spanning the whole raster cannot survive any non-zero shift.
  const KeypointLabel k{{0, 0}, {199, 149}, {0, 149}};
  Rng rng(1);
  const auto plan = draw_plan(Scenario::from_id(3), rng, k);
  EXPECT_EQ(plan.dx, 0);
  EXPECT_EQ(plan.dy, 0);
}

TEST(Apply, ScenarioOneIsIdentity) {
  const auto s = gradient_sample();
  Rng rng(3);
  const auto plan = draw_plan(Scenario::from_id(1), rng, s.label);
  EXPECT_TRUE(plan.is_identity());
  const auto out = apply(plan, s);
  EXPECT_EQ(out.image, s.image);
  EXPECT_EQ(out.label, s.label);
}

TEST(Apply, ScenarioEightDeterministic) {
  BackgroundPool pool;
  pool.images.push_back(ImageRGBA(200, 150, {10, 80, 30, 255}));
  pool.images.push_back(ImageRGBA(200, 150, {90, 20, 70, 255}));
  const auto s = gradient_sample();
  auto run = [&] {
    Rng rng(77);
    return apply(draw_plan(Scenario::from_id(8), rng, s.label, pool.size()), s, &pool);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.label, b.label);
  for (std::size_t i = 3; i < a.image.pixels.size(); i += 4) ASSERT_EQ(a.image.pixels[i], 255);
}

TEST(Apply, BackgroundIndexChecked) {
  AugmentPlan plan;
  plan.background = 0;
  EXPECT_THROW(apply(plan, gradient_sample(), nullptr), ConfigError);
}

TEST(Apply, ColouredMarkersCommuteWithScenarioSeven) {
  const Rgb3 colors[3] = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}};
  GenerateConfig g;
  g.n_samples = 200;
  g.seed = 11;
  const auto scenes = generate_samples(g);
  const auto sc = Scenario::from_id(7);
  int checked = 0;
  for (std::size_t n = 0; n < scenes.size(); ++n) {
    const KeypointLabel label = scenes[n].label.rounded();
    Sample s{ImageRGBA::frame(), label};
    const Point2 pts[3] = {label.thigh, label.knee, label.leg};
    for (int i = 0; i < 3; ++i) paint_dot(s.image, pts[i], colors[i]);

    Rng rng(derive_seed(99, {n}));
    const auto plan = draw_plan(sc, rng, label);
    const auto out = apply(plan, s);
    // Flip swaps the anatomical meaning of the outer markers.
    const Point2 want[3] = {plan.flip ? out.label.leg : out.label.thigh, out.label.knee,
                            plan.flip ? out.label.thigh : out.label.leg};
    for (int i = 0; i < 3; ++i) {
      const auto found = detect_marker(out.image, colors[i], 60);
      ASSERT_TRUE(found) << "sample " << n << " marker " << i;
      EXPECT_LE(std::hypot(found->x - want[i].x, found->y - want[i].y), 1.5) << "sample " << n << " marker " << i;
    }
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}
