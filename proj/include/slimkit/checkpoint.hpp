#pragma once

// Network checkpoint file:
//   "SLIM" | u32 version | spec | parameter tensors
// spec   : u32 input c,h,w | u32 classes | u32 layer count | per layer:
//          u32 kind, then kind fields (u32 ints, f64 for eps/momentum)
// tensors: per layer in order, each parameter's values, then BatchNorm running
//          mean and variance; all as little-endian f32.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slimkit/network.hpp"

namespace slim {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Network& net);
/// Throws StateError on a bad magic, unsupported version, or truncated data.
Network decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace slim
