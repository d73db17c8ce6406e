#include "slimkit/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "slimkit/errors.hpp"
#include "slimkit/trainer.hpp"

namespace slim {

std::vector<double> default_bucket_edges() {
  std::vector<double> edges;
  for (int e = -8; e <= 0; ++e) edges.push_back(e);
  return edges;
}

ScalingFactorSummary summarize_values(std::span<const double> gammas,
                                      std::span<const double> bucket_edges) {
  if (bucket_edges.size() < 2) throw InvalidInput("at least two bucket edges are required");
  for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
    if (!(bucket_edges[i] > bucket_edges[i - 1])) {
      throw InvalidInput("bucket edges must be strictly increasing");
    }
  }
  ScalingFactorSummary s;
  s.bucket_edges.assign(bucket_edges.begin(), bucket_edges.end());
  s.counts.assign(bucket_edges.size() - 1, 0.0);
  for (double g : gammas) {
    const double mag = std::fabs(g);
    if (mag <= kNegligibleGamma) {
      s.n_below += 1.0;
    } else {
      s.n_above += 1.0;
    }
    std::size_t bin = 0;
    if (mag > 0.0) {
      const double lg = std::log10(mag);
      const auto it = std::upper_bound(bucket_edges.begin(), bucket_edges.end(), lg);
      const auto pos = static_cast<std::size_t>(it - bucket_edges.begin());
      bin = pos == 0 ? 0 : std::min(pos - 1, s.counts.size() - 1);
    }
    s.counts[bin] += 1.0;
  }
  return s;
}

ScalingFactorSummary summarize_gammas(const Network& net, std::span<const double> bucket_edges) {
  if (net.spec().prunable_layers().empty()) {
    throw InvalidInput("network has no batch-norm scaling factors to summarize");
  }
  const auto gammas = collect_gammas(net);
  return summarize_values(gammas, bucket_edges);
}

ScalingFactorSummary aggregate_runs(std::span<const ScalingFactorSummary> summaries) {
  if (summaries.empty()) throw InvalidInput("no summaries to aggregate");
  ScalingFactorSummary out;
  out.bucket_edges = summaries.front().bucket_edges;
  out.counts.assign(summaries.front().counts.size(), 0.0);
  out.runs = 0;
  for (const auto& s : summaries) {
    if (s.bucket_edges != out.bucket_edges || s.counts.size() != out.counts.size()) {
      throw InvalidInput("cannot aggregate summaries with different bucket edges");
    }
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += s.counts[i];
    out.n_below += s.n_below;
    out.n_above += s.n_above;
  }
  const auto n = static_cast<double>(summaries.size());
  for (double& c : out.counts) c /= n;
  out.n_below /= n;
  out.n_above /= n;
  out.runs = static_cast<int>(summaries.size());
  return out;
}

}  // namespace slim
