#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kneeflex/network.hpp"

namespace kneeflex {

/// Checkpoint layout, all integers little-endian:
///   "EVA1" | u32 tensor count | per tensor: u16 name length, UTF-8 name,
///   u8 rank, u32 dims[rank], f32 data[prod(dims)] | u32 epoch | u8 scenario | u64 seed
struct CheckpointMeta {
  std::uint32_t epoch = 0;
  std::uint8_t scenario = 1;
  std::uint64_t seed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct LoadedCheckpoint {
  Network network;
  CheckpointMeta meta;
};

std::vector<std::uint8_t> encode_checkpoint(const Network& net, const CheckpointMeta& meta);

/// Decodes into a copy of `architecture`, whose tensor names and shapes must
/// match the file exactly. Throws FormatError on bad magic or truncation and
/// ShapeError on a name/shape mismatch.
LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const Network& architecture);

void save_checkpoint(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& path);

/// Loads against the Eva architecture.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const Network& architecture);

}  // namespace kneeflex
