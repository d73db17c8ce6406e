#pragma once

#include <span>
#include <vector>

#include "slimkit/network.hpp"

namespace slim {

/// Magnitude at or below which a scaling factor counts as numerically zero.
inline constexpr double kNegligibleGamma = 1e-6;

/// Histogram of log10|gamma| over the prunable scaling factors.
///
/// Bin i covers [edges[i], edges[i+1]). Values left of the first edge,
/// including gamma = 0, fall into bin 0; values right of the last edge fall
/// into the last bin, so the counts always add up to the number of factors.
/// Counts are reals so that averaged summaries share the type.
struct ScalingFactorSummary {
  std::vector<double> bucket_edges;
  std::vector<double> counts;
  double n_below = 0.0;  // |gamma| <= 1e-6
  double n_above = 0.0;  // |gamma| >  1e-6
  int runs = 1;

  double total() const noexcept { return n_below + n_above; }
};

/// Integer edges -8, -7, ..., 0.
std::vector<double> default_bucket_edges();

/// Throws InvalidInput when fewer than two edges are given or they are not
/// strictly increasing.
ScalingFactorSummary summarize_values(std::span<const double> gammas,
                                      std::span<const double> bucket_edges);
ScalingFactorSummary summarize_gammas(const Network& net, std::span<const double> bucket_edges);

/// Per-bucket and per-threshold arithmetic means. Throws InvalidInput on an
/// empty list or mismatched edges.
ScalingFactorSummary aggregate_runs(std::span<const ScalingFactorSummary> summaries);

}  // namespace slim
