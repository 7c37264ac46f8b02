#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "kneeflex/keypoints.hpp"

namespace kneeflex {

inline constexpr std::string_view kLabelsHeader = "img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y";
inline constexpr std::string_view kLabelsFile = "labels.csv";

struct DatasetRecord {
  long index = 0;
  KeypointLabel label;  // integer-valued

  bool operator==(const DatasetRecord&) const = default;
};

/// Serializes records as labels.csv text (LF endings, integer coordinates).
std::string format_labels_csv(const std::vector<DatasetRecord>& records);

/// Parses labels.csv text. Throws FormatError on a bad header, wrong column
/// count, non-integer fields, or duplicate indices.
std::vector<DatasetRecord> parse_labels_csv(std::string_view text);

std::vector<DatasetRecord> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

/// Loads <dir>/labels.csv and every <index>.png it names, in CSV order.
/// Images that are not 200x150 are resized and their labels rescaled.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

}  // namespace kneeflex
