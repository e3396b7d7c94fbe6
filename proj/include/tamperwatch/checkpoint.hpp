#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "tamperwatch/feature_map.hpp"

namespace tamperwatch {

/// One parameter array as stored in a checkpoint: its shape and payload.
struct CheckpointArray {
  std::vector<std::uint32_t> dims;
  ArrayX<double> data;
};

/// A shape plus a borrowed pointer to the live array, used when writing.
using CheckpointArrayRef = std::pair<std::vector<std::uint32_t>, const ArrayX<double>*>;

/// Writes arrays to the binary checkpoint format: magic "CLTM", a version
/// byte, a manifest of array count and per-array shapes in declared order,
/// then every value as a little-endian 64-bit float. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointArrayRef>& arrays);

std::vector<CheckpointArray> load_checkpoint(const std::filesystem::path& path);

inline constexpr char kCheckpointMagic[4] = {'C', 'L', 'T', 'M'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

}  // namespace tamperwatch
