#pragma once

// Labelled image sets and the SLDS dataset file:
//   "SLDS" | u32 version | u32 n, c, h, w | n*c*h*w f32 | n u16 labels
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slimkit/tensor.hpp"

namespace slim {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  Tensor4 images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }

  /// Copies the selected samples into a batch.
  Tensor4 gather_images(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

  /// Throws InvalidInput if any label is outside [0, classes).
  void check_labels(int classes) const;
};

enum class SyntheticKind { Blobs, Rings };

SyntheticKind parse_synthetic_kind(const std::string& text);
std::string to_string(SyntheticKind kind);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Blobs;
  int n = 0;
  int classes = 2;
  int channels = 3;
  int height = 8;
  int width = 8;
  std::uint64_t seed = 0;
  double noise = 0.5;
};

/// Seeded, class-balanced images: each class is a fixed spatial pattern
/// (a Gaussian blob at a class-specific position and channel mix, or a ring of
/// class-specific radius) with random jitter, amplitude and additive noise.
/// Values are rounded to f32 so that a saved file reloads bit-identically.
Dataset generate_synthetic(const SyntheticSpec& spec);

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace slim
