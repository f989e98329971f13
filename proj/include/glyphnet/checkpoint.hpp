#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "glyphnet/model.hpp"

namespace glyphnet {

// Binary layout (little-endian):
//   "TICN"  u16 version
//   u64 input_h, input_w, kernel, stride, num_conv, filters[num_conv],
//       dense_units, num_outputs, seed
//   u64 step, u32 length + bytes of the serialized RNG state
//   per parameter group: u32 rank, u64 dims[rank], f32 values

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::uint64_t step = 0;
  /// Text form of the trainer's RNG (operator<< of std::mt19937_64); may be empty.
  std::string rng_state;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError for a bad magic, an unknown version, truncation or
/// trailing bytes, and ShapeError when a tensor disagrees with the header.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As load_checkpoint, but throws ShapeError unless the stored architecture
/// equals `expected` (the seed is not compared).
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace glyphnet
