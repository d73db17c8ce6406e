#include <gtest/gtest.h>

#include <numeric>

#include "slimkit/analysis.hpp"
#include "slimkit/errors.hpp"
#include "test_util.hpp"

using namespace slim;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Summary, HandClassifiedExample) {
  const std::vector<double> edges{-7, -6, -5, -4, -3, -2, -1, 0};
  const auto s = summarize_values(std::vector<double>{1e-8, 1e-3, 0.5}, edges);
  EXPECT_EQ(s.n_below, 1.0);
  EXPECT_EQ(s.n_above, 2.0);
  EXPECT_EQ(s.counts, (std::vector<double>{1, 0, 0, 0, 1, 0, 1}));
}

TEST(Summary, IdenticalValuesShareOneBucket) {
  const auto s = summarize_values(std::vector<double>(9, 0.5), default_bucket_edges());
  EXPECT_EQ(s.n_below, 0.0);
  EXPECT_EQ(std::count(s.counts.begin(), s.counts.end(), 9.0), 1);
  EXPECT_EQ(sum(s.counts), 9.0);
}

TEST(Summary, ZeroAndOutOfRangeValuesClampToEdgeBuckets) {
  const auto s = summarize_values(std::vector<double>{0.0, -1e-12, 5.0, 1.0}, default_bucket_edges());
  EXPECT_EQ(s.counts.front(), 2.0);
  EXPECT_EQ(s.counts.back(), 2.0);
  EXPECT_EQ(s.n_below, 2.0);
}

TEST(Summary, ThresholdIsInclusive) {
  const auto s = summarize_values(std::vector<double>{1e-6, -1e-6, 1.0000001e-6}, default_bucket_edges());
  EXPECT_EQ(s.n_below, 2.0);
  EXPECT_EQ(s.n_above, 1.0);
}

TEST(Summary, CountsConservedAndThresholdsIndependentOfEdges) {
  Rng rng(3);
  std::vector<double> g(500);
  for (double& v : g) v = std::pow(10.0, rng.uniform(-10, 1)) * (rng.uniform() < 0.5 ? -1 : 1);
  g[0] = 0.0;
  const std::vector<std::vector<double>> edge_sets{default_bucket_edges(), {-3, 0}, {-12, -6, -1, 0.5, 2}};
  const auto ref = summarize_values(g, edge_sets[0]);
  for (const auto& edges : edge_sets) {
    const auto s = summarize_values(g, edges);
    EXPECT_EQ(sum(s.counts), 500.0);
    EXPECT_EQ(s.total(), 500.0);
    EXPECT_EQ(s.n_below, ref.n_below);
    EXPECT_EQ(s.n_above, ref.n_above);
  }
}

TEST(Summary, InvalidEdgesRejected) {
  const std::vector<double> g{0.1};
  EXPECT_THROW(summarize_values(g, std::vector<double>{}), InvalidInput);
  EXPECT_THROW(summarize_values(g, std::vector<double>{0}), InvalidInput);
  EXPECT_THROW(summarize_values(g, std::vector<double>{0, 0}), InvalidInput);
  EXPECT_THROW(summarize_values(g, std::vector<double>{1, 0}), InvalidInput);
}

TEST(Summary, NetworkWithoutBatchNormRejected) {
  NetworkSpec s;
  s.input = {2, 1, 1};
  s.classes = 2;
  s.layers = {LayerSpec::flatten(), LayerSpec::dense(2, 2)};
  EXPECT_THROW(summarize_gammas(Network(s), default_bucket_edges()), InvalidInput);
}

TEST(Summary, GammasOfNetwork) {
  Network net = Network::initialized(testutil::two_conv_spec(1, 4, 2, 3, 2), 1);
  net.param(1, ParamRole::Gamma)[0] = 0.0;
  const auto s = summarize_gammas(net, default_bucket_edges());
  EXPECT_EQ(s.n_below, 1.0);
  EXPECT_EQ(s.n_above, 4.0);
}

TEST(Aggregate, MeansPerBucketAndThreshold) {
  const auto edges = default_bucket_edges();
  const auto one = summarize_values(std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.0}, edges);
  const auto two = summarize_values(std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0}, edges);
  const auto self = aggregate_runs(std::vector<ScalingFactorSummary>{one});
  EXPECT_EQ(self.counts, one.counts);
  EXPECT_EQ(self.n_below, one.n_below);
  const auto m = aggregate_runs(std::vector<ScalingFactorSummary>{one, two});
  EXPECT_EQ(m.counts.back(), 5.0);
  EXPECT_EQ(m.n_below, 2.0);
  EXPECT_EQ(m.n_above, 5.0);
  EXPECT_EQ(m.runs, 2);
}

TEST(Aggregate, MismatchedEdgesOrEmptyRejected) {
  const auto a = summarize_values(std::vector<double>{0.5}, default_bucket_edges());
  const auto b = summarize_values(std::vector<double>{0.5}, std::vector<double>{-1, 0});
  EXPECT_THROW(aggregate_runs(std::vector<ScalingFactorSummary>{a, b}), InvalidInput);
  EXPECT_THROW(aggregate_runs(std::vector<ScalingFactorSummary>{}), InvalidInput);
}
