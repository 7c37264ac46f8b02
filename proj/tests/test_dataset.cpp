#include <gtest/gtest.h>

#include "kneeflex/dataset.hpp"
#include "kneeflex/error.hpp"
#include "support/oracles.hpp"

using namespace kneeflex;
using kneeflex::testing::TempDir;

TEST(LabelsCsv, FormatMatchesSchema) {
  const std::vector<DatasetRecord> rows = {{0, {{62, 74}, {98, 71}, {137, 73}}}, {1, {{10, 20}, {30, 40}, {50, 60}}}};
  EXPECT_EQ(format_labels_csv(rows),
            "img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y\n0,62,74,98,71,137,73\n1,10,20,30,40,50,60\n");
  EXPECT_EQ(parse_labels_csv(format_labels_csv(rows)), rows);
}

TEST(LabelsCsv, ToleratesCrlfAndTrailingBlank) {
  const auto rows = parse_labels_csv("img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y\r\n3,1,2,3,4,5,6\r\n\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].index, 3);
  EXPECT_EQ(rows[0].label.leg, (Point2{5, 6}));
}

TEST(LabelsCsv, Rejections) {
  const std::string h = "img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y\n";
  EXPECT_THROW(parse_labels_csv(""), FormatError);
  EXPECT_THROW(parse_labels_csv("img,a,b\n0,1,2\n"), FormatError);
  EXPECT_THROW(parse_labels_csv(h + "0,1,2,3,4,5\n"), FormatError);
  EXPECT_THROW(parse_labels_csv(h + "0,1,2,3,4,5,6,7\n"), FormatError);
  EXPECT_THROW(parse_labels_csv(h + "0,1.5,2,3,4,5,6\n"), FormatError);
  EXPECT_THROW(parse_labels_csv(h + "0,x,2,3,4,5,6\n"), FormatError);
  EXPECT_THROW(parse_labels_csv(h + "0,1,2,3,4,5,6\n0,1,2,3,4,5,6\n"), FormatError);
}

TEST(LoadDataset, MissingImageIsIoError) {
  TempDir dir("ds_missing");
  write_labels_csv(dir / "labels.csv", {{0, {{1, 1}, {2, 2}, {3, 3}}}});
  EXPECT_THROW(load_dataset(dir.path()), IoError);
  EXPECT_THROW(load_dataset(dir / "nowhere"), IoError);
}

TEST(LoadDataset, ResizesForeignFrames) {
  TempDir dir("ds_resize");
  write_png(dir / "0.png", ImageRGBA(100, 75, {5, 6, 7, 255}));
  write_labels_csv(dir / "labels.csv", {{0, {{10, 20}, {50, 37}, {99, 74}}}});
  const auto s = load_dataset(dir.path());
  ASSERT_EQ(s.size(), 1u);
  EXPECT_TRUE(s[0].image.is_frame());
  EXPECT_EQ(s[0].label, (KeypointLabel{{20.5, 40.5}, {100.5, 74.5}, {198.5, 148.5}}));
}
