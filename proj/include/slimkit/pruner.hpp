#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slimkit/network.hpp"

namespace slim {

struct LayerMask {
  std::size_t layer = 0;   // index of the BatchNorm layer
  std::vector<bool> keep;  // one entry per channel
};

struct PrunePlan {
  double ratio = 0.0;
  double threshold = 0.0;
  std::size_t total_channels = 0;
  std::size_t pruned_channel_count = 0;
  std::vector<LayerMask> keep_masks;
  bool over_pruned = false;
  std::vector<std::size_t> over_pruned_layers;
};

/// Number of channels removed for a ratio: floor(ratio * n), with a 1e-9
/// allowance so that decimal ratios such as 0.29 * 100 are not rounded down.
std::size_t prune_count(double ratio, std::size_t total);

/// Global magnitude ranking over every prunable scaling factor. The first
/// prune_count(ratio, n) entries of a stable ascending sort of |gamma| are
/// pruned; the threshold is the magnitude of the last pruned entry.
/// Throws InvalidInput when ratio is outside [0, 1) or nothing is prunable.
PrunePlan plan_prune(const Network& net, double ratio);

/// Builds the dense compressed network. Pruned channels lose their conv output
/// kernels, BatchNorm entries and the matching input slice of the next
/// weighted layer (a block of H*W columns when crossing Flatten into Dense).
/// Throws OverPrunedError for an over-pruned plan and StateError when the plan
/// does not belong to `net`.
Network apply_prune(const Network& net, const PrunePlan& plan);

/// Copy of `net` with gamma and beta of every pruned channel set to 0.
Network mask_pruned_channels(const Network& net, const PrunePlan& plan);

struct CompressionReport {
  std::int64_t params_before = 0;
  std::int64_t params_after = 0;
  std::int64_t flops_before = 0;
  std::int64_t flops_after = 0;
  double percent_params_pruned = 0.0;
  double percent_flops_pruned = 0.0;
  std::optional<double> accuracy_before_prune;
  std::optional<double> accuracy_after_prune;
  std::optional<double> accuracy_after_retrain;
};

struct ReportAccuracies {
  std::optional<double> before_prune;
  std::optional<double> after_prune;
  std::optional<double> after_retrain;
};

/// (1 - after / before) * 100 for parameters and FLOPs.
CompressionReport compression_report(const Network& before, const Network& after,
                                     const ReportAccuracies& accuracies = {});

double percent_pruned(std::int64_t before, std::int64_t after);

}  // namespace slim
