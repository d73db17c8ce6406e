// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   slimkit_acceptance --config configs/reference.json --smoke configs/smoke.json --work DIR

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "slimkit/analysis.hpp"
#include "slimkit/checkpoint.hpp"
#include "slimkit/config.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/network.hpp"
#include "slimkit/pipeline.hpp"
#include "slimkit/pruner.hpp"
#include "slimkit/regularizers.hpp"
#include "slimkit/rng.hpp"

using namespace slim;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kSubgradientRelTol = 1e-4;
constexpr double kTl1ToL1RelTol = 1e-4;
constexpr double kTl1ToL0AbsTol = 1e-5;
constexpr double kLpToL1RelTol = 1e-4;
constexpr double kGradCheckRelTol = 1e-3;
constexpr double kGradCheckFloor = 1e-6;  // denominator floor for near-zero gradients
constexpr int kGradCheckCoords = 50;
constexpr double kSurgeryLogitTol = 1e-6;
constexpr double kRecoveryPoints = 0.02;
constexpr double kRecoveryRatio = 0.4;
constexpr double kBudgetSubgradient = 1.0;
constexpr double kBudgetLimits = 1.0;
constexpr double kBudgetSaturation = 1.0;
constexpr double kBudgetGradCheck = 30.0;
constexpr double kBudgetPruneCount = 5.0;
constexpr double kBudgetSurgery = 60.0;
constexpr double kBudgetTrend = 15.0 * 60.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void within_budget(Outcome& o, const Stopwatch& sw, double budget) {
  const double t = sw.seconds();
  o.detail += ", " + fmt("%.2f", t) + " s";
  if (t > budget) {
    o.pass = false;
    o.detail += " over budget " + fmt("%.0f", budget) + " s";
  }
}

bool near_breakpoint(const RegularizerSpec& s, double x) {
  if (s.kind() != PenaltyKind::MCP && s.kind() != PenaltyKind::SCAD) return false;
  const double lam = s.lambda_internal();
  return std::fabs(x - lam) < 1e-3 || std::fabs(x - s.a() * lam) < 1e-3;
}

double value1(const RegularizerSpec& s, double t) {
  const double z[1] = {t};
  return penalty_value(s, z);
}

// ---------------------------------------------------------------------------

Outcome subgradient_correctness() {
  Stopwatch sw;
  Outcome o;
  std::vector<RegularizerSpec> specs{RegularizerSpec::l1(),     RegularizerSpec::lp(0.25),  RegularizerSpec::lp(0.5),
                                     RegularizerSpec::lp(0.75), RegularizerSpec::tl1(0.5),  RegularizerSpec::tl1(1),
                                     RegularizerSpec::tl1(10),  RegularizerSpec::mcp(1.5),  RegularizerSpec::mcp(2),
                                     RegularizerSpec::mcp(5),   RegularizerSpec::scad(3),   RegularizerSpec::scad(5),
                                     RegularizerSpec::scad(10)};
  Rng rng(101);
  double worst = 0.0;
  int failures = 0;
  for (const auto& s : specs) {
    std::vector<double> z;
    while (z.size() < 1000) {
      // magnitudes log-uniform over [1e-3, 20] so both the steep region near 0 and saturation are hit
      const double t = std::pow(10.0, rng.uniform(-3.0, std::log10(20.0))) * (rng.uniform() < 0.5 ? -1 : 1);
      if (!near_breakpoint(s, std::fabs(t))) z.push_back(t);
    }
    const auto g = penalty_subgradient(s, z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-6 * std::fabs(z[i]);
      const double fd = (value1(s, z[i] + h) - value1(s, z[i] - h)) / (2 * h);
      if (g[i] == 0.0) {
        if (std::fabs(fd) > 1e-12) ++failures;
        continue;
      }
      const double rel = std::fabs(fd - g[i]) / std::fabs(g[i]);
      worst = std::max(worst, rel);
      if (rel > kSubgradientRelTol) ++failures;
    }
  }
  o.pass = failures == 0;
  o.detail = std::to_string(specs.size()) + " penalties x 1000 points, max rel err " + fmt("%.2e", worst) +
             ", failures " + std::to_string(failures);
  within_budget(o, sw, kBudgetSubgradient);
  return o;
}

Outcome interpolation_limits() {
  Stopwatch sw;
  Outcome o;
  Rng rng(102);
  double worst_l1 = 0, worst_l0 = 0, worst_lp = 0;
  const auto tl1_big = RegularizerSpec::tl1(1e6);
  const auto tl1_small = RegularizerSpec::tl1(1e-8);
  const auto lp = RegularizerSpec::lp(1 - 1e-6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> z(20), zs(20);
    int nonzero = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = rng.uniform(-10.0, 10.0);
      if (rng.uniform() < 0.3) {
        zs[i] = 0.0;
      } else {
        zs[i] = rng.uniform(0.1, 10.0) * (rng.uniform() < 0.5 ? -1 : 1);
        ++nonzero;
      }
    }
    const double l1 = penalty_value(RegularizerSpec::l1(), z);
    worst_l1 = std::max(worst_l1, std::fabs(penalty_value(tl1_big, z) - l1) / l1);
    worst_lp = std::max(worst_lp, std::fabs(penalty_value(lp, z) - l1) / l1);
    worst_l0 = std::max(worst_l0, std::fabs(penalty_value(tl1_small, zs) - nonzero));
  }
  o.pass = worst_l1 <= kTl1ToL1RelTol && worst_l0 <= kTl1ToL0AbsTol && worst_lp <= kLpToL1RelTol;
  o.detail = "tl1(1e6) vs l1 rel " + fmt("%.2e", worst_l1) + ", tl1(1e-8) vs count abs " + fmt("%.2e", worst_l0) +
             ", lp(1-1e-6) vs l1 rel " + fmt("%.2e", worst_lp);
  within_budget(o, sw, kBudgetLimits);
  return o;
}

Outcome saturation() {
  Stopwatch sw;
  Outcome o;
  Rng rng(103);
  int failures = 0;
  int samples = 0;
  struct Case {
    RegularizerSpec spec;
    double plateau;
  };
  std::vector<Case> cases;
  for (double a : {1.5, 2.0, 5.0}) cases.push_back({RegularizerSpec::mcp(a), a / 2.0});
  for (double a : {3.0, 5.0, 10.0}) cases.push_back({RegularizerSpec::scad(a), (a + 1.0) / 2.0});
  for (const auto& c : cases) {
    for (int i = 0; i < 1000; ++i, ++samples) {
      const double t = std::nextafter(c.spec.a(), 1e300) + rng.uniform(0.0, 100.0);
      const double z[1] = {rng.uniform() < 0.5 ? -t : t};
      if (penalty_value(c.spec, z) != c.plateau || penalty_subgradient(c.spec, z)[0] != 0.0) ++failures;
    }
  }
  o.pass = failures == 0;
  o.detail = std::to_string(samples) + " samples beyond a, failures " + std::to_string(failures);
  within_budget(o, sw, kBudgetSaturation);
  return o;
}

// ---------------------------------------------------------------------------

NetworkSpec random_two_conv(Rng& rng) {
  const int in_c = 1 + static_cast<int>(rng.below(3));
  const int side = 4 + 2 * static_cast<int>(rng.below(2));
  const int c1 = 3 + static_cast<int>(rng.below(4));
  const int c2 = 3 + static_cast<int>(rng.below(4));
  const int classes = 2 + static_cast<int>(rng.below(3));
  NetworkSpec s;
  s.input = {in_c, side, side};
  s.classes = classes;
  s.layers = {LayerSpec::conv2d(in_c, c1, 3, 1, 1), LayerSpec::batch_norm(c1), LayerSpec::relu()};
  int hw = side;
  if (rng.uniform() < 0.5) {
    s.layers.push_back(rng.uniform() < 0.5 ? LayerSpec::max_pool(2, 2) : LayerSpec::avg_pool(2, 2));
    hw /= 2;
  }
  s.layers.push_back(LayerSpec::conv2d(c1, c2, 3, 1, 1));
  s.layers.push_back(LayerSpec::batch_norm(c2));
  s.layers.push_back(LayerSpec::relu());
  s.layers.push_back(LayerSpec::flatten());
  s.layers.push_back(LayerSpec::dense(c2 * hw * hw, classes));
  return s;
}

void randomize_batchnorm(Network& net, Rng& rng) {
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (net.spec().layers[i].kind != LayerKind::BatchNorm) continue;
    for (double& g : net.param(i, ParamRole::Gamma)) g = rng.uniform(0.2, 1.5);
    for (double& b : net.param(i, ParamRole::Beta)) b = rng.uniform(-0.5, 0.5);
    for (double& m : net.layer(i).running_mean) m = rng.uniform(-0.5, 0.5);
    for (double& v : net.layer(i).running_var) v = rng.uniform(0.5, 2.0);
  }
}

Tensor4 random_input(const Shape3& s, int n, Rng& rng) {
  Tensor4 x(n, s.c, s.h, s.w);
  for (double& v : x.data) v = rng.normal();
  return x;
}

Outcome gradient_check() {
  Stopwatch sw;
  Outcome o;
  Rng rng(104);
  double worst = 0.0;
  int failures = 0, checked = 0, tensors = 0;
  const double h = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    const NetworkSpec spec = random_two_conv(rng);
    Network net = Network::initialized(spec, 500 + trial);
    randomize_batchnorm(net, rng);
    const int batch = 4;
    const Tensor4 x = random_input(spec.input, batch, rng);
    std::vector<int> labels(batch);
    for (int& l : labels) l = static_cast<int>(rng.below(spec.classes));
    auto loss_at = [&] { return cross_entropy(forward(net, x, Mode::Train).output, labels).loss; };
    const auto fr = forward(net, x, Mode::Train);
    const auto grads = backward(net, fr.cache, cross_entropy(fr.output, labels).grad_logits);

    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      for (std::size_t j = 0; j < net.layer(l).params.size(); ++j) {
        ++tensors;
        auto& theta = net.layer(l).params[j].value;
        std::vector<std::size_t> coords(theta.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        rng.shuffle(std::span<std::size_t>(coords));
        coords.resize(std::min<std::size_t>(coords.size(), kGradCheckCoords));
        for (std::size_t i : coords) {
          const double saved = theta[i];
          theta[i] = saved + h;
          const double up = loss_at();
          theta[i] = saved - h;
          const double down = loss_at();
          theta[i] = saved;
          const double fd = (up - down) / (2 * h);
          const double an = grads.params[l][j][i];
          const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), kGradCheckFloor});
          worst = std::max(worst, rel);
          ++checked;
          if (rel > kGradCheckRelTol) ++failures;
        }
      }
    }
  }
  o.pass = failures == 0;
  o.detail = "5 nets, " + std::to_string(tensors) + " tensors, " + std::to_string(checked) +
             " coordinates (min(size, 50) each), max rel err " + fmt("%.2e", worst) + ", failures " +
             std::to_string(failures);
  within_budget(o, sw, kBudgetGradCheck);
  return o;
}

// ---------------------------------------------------------------------------

// 1x1-conv chain whose BN layers hold exactly `sizes` channels.
Network chain_with_channels(const std::vector<int>& sizes) {
  NetworkSpec s;
  s.input = {1, 1, 1};
  s.classes = 2;
  int in = 1;
  for (int c : sizes) {
    s.layers.push_back(LayerSpec::conv2d(in, c, 1));
    s.layers.push_back(LayerSpec::batch_norm(c));
    in = c;
  }
  s.layers.push_back(LayerSpec::flatten());
  s.layers.push_back(LayerSpec::dense(in, 2));
  return Network(s);
}

Outcome prune_count_exactness() {
  Stopwatch sw;
  Outcome o;
  Rng rng(105);
  int failures = 0, plans = 0;
  std::vector<std::size_t> ns{1, 2, 3, 7, 20, 101, 1000, 4099, 9999, 10000};
  for (std::size_t n : ns) {
    // split n into layers of at most 250 channels
    std::vector<int> sizes;
    for (std::size_t left = n; left > 0;) {
      const auto c = static_cast<int>(std::min<std::size_t>(left, 1 + rng.below(250)));
      sizes.push_back(c);
      left -= c;
    }
    Network net = chain_with_channels(sizes);
    const bool coarse = rng.uniform() < 0.5;
    for (std::size_t l : net.spec().prunable_layers()) {
      for (double& g : net.param(l, ParamRole::Gamma)) {
        double v = rng.uniform(-1.0, 1.0);
        if (coarse) v = std::round(v * 10.0) / 10.0;  // many ties, including zeros
        g = v;
      }
    }
    for (int i = 0; i < 20; ++i, ++plans) {
      const double ratio = i / 20.0;
      const auto plan = plan_prune(net, ratio);
      const std::size_t expected = static_cast<std::size_t>(i) * n / 20;  // exact floor(ratio * n)
      bool ok = plan.pruned_channel_count == expected && plan.total_channels == n;

      std::size_t pruned = 0;
      std::size_t order = 0, last_pruned_at_tie = 0, first_kept_at_tie = SIZE_MAX;
      for (const auto& m : plan.keep_masks) {
        const auto g = net.param(m.layer, ParamRole::Gamma);
        for (std::size_t c = 0; c < m.keep.size(); ++c, ++order) {
          const double mag = std::fabs(g[c]);
          if (!m.keep[c]) {
            ++pruned;
            ok = ok && mag <= plan.threshold;
            if (mag == plan.threshold) last_pruned_at_tie = order;
          } else {
            ok = ok && mag >= plan.threshold;
            if (mag == plan.threshold) first_kept_at_tie = std::min(first_kept_at_tie, order);
          }
        }
      }
      ok = ok && pruned == expected;
      if (expected > 0 && first_kept_at_tie != SIZE_MAX) ok = ok && last_pruned_at_tie < first_kept_at_tie;
      if (expected == 0) ok = ok && plan.threshold == 0.0;
      if (!ok) ++failures;
    }
  }
  o.pass = failures == 0;
  o.detail = std::to_string(plans) + " plans over n in {1..10000} with ties, failures " + std::to_string(failures);
  within_budget(o, sw, kBudgetPruneCount);
  return o;
}

// ---------------------------------------------------------------------------

struct Counts {
  std::int64_t params = 0;
  std::int64_t flops = 0;
};

// Brute-force enumeration of the compressed network's size from the original
// spec and per-BN kept-channel counts, walking the layers independently of the
// pruner's surgery code.
Counts enumerate_pruned(const NetworkSpec& spec, const std::map<std::size_t, int>& kept) {
  Counts n;
  int c = spec.input.c, h = spec.input.h, w = spec.input.w;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::Conv2d: {
        const int out = kept.count(i + 1) ? kept.at(i + 1) : l.out_ch;
        const int ho = (h + 2 * l.pad - l.kernel) / l.stride + 1;
        const int wo = (w + 2 * l.pad - l.kernel) / l.stride + 1;
        for (int o = 0; o < out; ++o) {
          for (int ci = 0; ci < c; ++ci) {
            for (int k = 0; k < l.kernel * l.kernel; ++k) {
              ++n.params;
              n.flops += 2LL * ho * wo;
            }
          }
          if (l.has_bias) ++n.params;
        }
        c = out;
        h = ho;
        w = wo;
        break;
      }
      case LayerKind::BatchNorm:
        n.params += 2LL * c;
        n.flops += 2LL * c * h * w;
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        h = (h - l.window) / l.stride + 1;
        w = (w - l.window) / l.stride + 1;
        break;
      case LayerKind::Flatten:
        c = c * h * w;
        h = w = 1;
        break;
      case LayerKind::Dense:
        n.params += static_cast<std::int64_t>(c) * l.out_dim + (l.has_bias ? l.out_dim : 0);
        n.flops += 2LL * c * l.out_dim;
        c = l.out_dim;
        break;
      case LayerKind::ReLU:
        break;
    }
  }
  return n;
}

std::map<std::size_t, int> kept_counts(const PrunePlan& plan) {
  std::map<std::size_t, int> kept;
  for (const auto& m : plan.keep_masks) kept[m.layer] = static_cast<int>(std::count(m.keep.begin(), m.keep.end(), true));
  return kept;
}

NetworkSpec random_surgery_net(Rng& rng) {
  NetworkSpec s;
  const int in_c = 1 + static_cast<int>(rng.below(3));
  int side = 4 + static_cast<int>(rng.below(5));
  s.input = {in_c, side, side};
  const int blocks = 2 + static_cast<int>(rng.below(2));
  int c = in_c;
  for (int b = 0; b < blocks; ++b) {
    const int out = 2 + static_cast<int>(rng.below(6));
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    s.layers.push_back(LayerSpec::conv2d(c, out, k, 1, k / 2, rng.uniform() < 0.2));
    s.layers.push_back(LayerSpec::batch_norm(out));
    s.layers.push_back(LayerSpec::relu());
    if (side >= 4 && rng.uniform() < 0.4) {
      s.layers.push_back(rng.uniform() < 0.5 ? LayerSpec::max_pool(2, 2) : LayerSpec::avg_pool(2, 2));
      side /= 2;
    }
    c = out;
  }
  s.classes = 2 + static_cast<int>(rng.below(4));
  s.layers.push_back(LayerSpec::flatten());
  s.layers.push_back(LayerSpec::dense(c * side * side, s.classes));
  return s;
}

Outcome surgery_equivalence() {
  Stopwatch sw;
  Outcome o;
  Rng rng(106);
  int nets = 0, failures = 0, skipped_na = 0;
  double worst = 0.0;
  while (nets < 100) {
    const NetworkSpec spec = random_surgery_net(rng);
    Network net = Network::initialized(spec, 900 + nets + skipped_na);
    randomize_batchnorm(net, rng);
    const auto plan = plan_prune(net, rng.uniform(0.05, 0.6));
    if (plan.over_pruned) {
      ++skipped_na;
      continue;
    }
    ++nets;
    const Network masked = mask_pruned_channels(net, plan);
    const Network compressed = apply_prune(masked, plan);
    const Tensor4 x = random_input(spec.input, 3, rng);
    const auto a = predict(masked, x).data;
    const auto b = predict(compressed, x).data;
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
    worst = std::max(worst, diff);

    const Counts before = enumerate_pruned(spec, {});
    const Counts after = enumerate_pruned(spec, kept_counts(plan));
    const bool counts_ok = count_params(net) == before.params && count_flops(net) == before.flops &&
                           count_params(compressed) == after.params && count_flops(compressed) == after.flops &&
                           count_params(net) - count_params(compressed) == before.params - after.params;
    if (diff > kSurgeryLogitTol || !counts_ok) ++failures;
  }
  o.pass = failures == 0;
  o.detail = "100 nets (" + std::to_string(skipped_na) + " over-pruned draws redrawn), max logit diff " +
             fmt("%.2e", worst) + ", failures " + std::to_string(failures);
  within_budget(o, sw, kBudgetSurgery);
  return o;
}

// ---------------------------------------------------------------------------

// Sets gammas so that exactly the listed channels of each BN layer are the
// globally smallest, then prunes by the matching ratio.
Network prune_fixture(const NetworkSpec& spec, const std::map<std::size_t, std::vector<int>>& drop) {
  Network net = Network::initialized(spec, 7);
  std::size_t total = 0, dropped = 0;
  double small = 0.001;
  for (std::size_t l : spec.prunable_layers()) {
    auto g = net.param(l, ParamRole::Gamma);
    total += g.size();
    for (double& v : g) v = 1.0;
    if (auto it = drop.find(l); it != drop.end()) {
      for (int c : it->second) {
        g[c] = small;
        small += 0.001;
        ++dropped;
      }
    }
  }
  const auto plan = plan_prune(net, static_cast<double>(dropped) / static_cast<double>(total));
  if (plan.pruned_channel_count != dropped || plan.over_pruned) throw StateError("fixture plan mismatch");
  return apply_prune(net, plan);
}

Outcome metric_formulas() {
  Outcome o;
  struct Fixture {
    std::string name;
    NetworkSpec spec;
    std::map<std::size_t, std::vector<int>> drop;
    std::int64_t params_before, params_after, flops_before, flops_after;
  };
  std::vector<Fixture> fixtures;

  {
    NetworkSpec s;  // conv(2->4) BN conv(4->3) BN on a 1x1 image
    s.input = {2, 1, 1};
    s.classes = 3;
    s.layers = {LayerSpec::conv2d(2, 4, 3, 1, 1), LayerSpec::batch_norm(4), LayerSpec::conv2d(4, 3, 3, 1, 1),
                LayerSpec::batch_norm(3), LayerSpec::flatten()};
    // before: 72 + 8 + 108 + 6 params; 144 + 8 + 216 + 6 FLOPs
    // after (4 -> 2 middle channels): 36 + 4 + 54 + 6; 72 + 4 + 108 + 6
    fixtures.push_back({"chain", s, {{1, {1, 3}}}, 194, 100, 374, 190});
  }
  {
    NetworkSpec s;  // conv(2->3)@6x6 BN relu maxpool conv(3->4)@3x3 BN relu flatten dense(36->3)
    s.input = {2, 6, 6};
    s.classes = 3;
    s.layers = {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::batch_norm(3), LayerSpec::relu(),
                LayerSpec::max_pool(2, 2),        LayerSpec::conv2d(3, 4, 3, 1, 1), LayerSpec::batch_norm(4),
                LayerSpec::relu(),                LayerSpec::flatten(),             LayerSpec::dense(36, 3)};
    // before: 54 + 6 + 108 + 8 + 111 params; 3888 + 216 + 1944 + 72 + 216 FLOPs
    // after (3 -> 2, 4 -> 2): 36 + 4 + 36 + 4 + 57; 2592 + 144 + 648 + 36 + 108
    fixtures.push_back({"pool+dense", s, {{1, {0}}, {5, {1, 2}}}, 287, 137, 6336, 3528});
  }
  {
    const auto cfg = load_config(SLIMKIT_SOURCE_DIR "/configs/reference.json");
    // widths 8-16-16-32 -> 4-8-12-16 on 3x8x8 input
    // before: 216+16+1152+32+2304+32+4608+64+132 params;
    //         27648+1024+36864+512+73728+512+36864+256+256 FLOPs
    // after:  108+8+288+16+864+24+1728+32+68 params;
    //         13824+512+9216+256+27648+384+13824+128+128 FLOPs
    fixtures.push_back({"reference",
                        cfg.network,
                        {{1, {0, 2, 4, 6}}, {5, {0, 1, 2, 3, 4, 5, 6, 7}}, {8, {3, 7, 11, 15}},
                         {12, {0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30}}},
                        8556, 3136, 177664, 65920});
  }

  int failures = 0;
  for (const auto& f : fixtures) {
    const Network before = Network::initialized(f.spec, 7);
    const Network after = prune_fixture(f.spec, f.drop);
    const auto r = compression_report(before, after);
    const double pp = (1.0 - static_cast<double>(f.params_after) / static_cast<double>(f.params_before)) * 100.0;
    const double fp = (1.0 - static_cast<double>(f.flops_after) / static_cast<double>(f.flops_before)) * 100.0;
    const bool ok = r.params_before == f.params_before && r.params_after == f.params_after &&
                    r.flops_before == f.flops_before && r.flops_after == f.flops_after &&
                    r.percent_params_pruned == pp && r.percent_flops_pruned == fp;
    if (!ok) ++failures;
    o.detail += (o.detail.empty() ? "" : "; ") + f.name + " params " + fmt("%.4f", r.percent_params_pruned) +
                "% flops " + fmt("%.4f", r.percent_flops_pruned) + "%";
  }
  o.pass = failures == 0;
  return o;
}

// ---------------------------------------------------------------------------

Outcome over_pruned_detection(const fs::path& work) {
  Outcome o;
  NetworkSpec s;
  s.input = {1, 4, 4};
  s.classes = 2;
  s.layers = {LayerSpec::conv2d(1, 4, 3, 1, 1), LayerSpec::batch_norm(4), LayerSpec::relu(),
              LayerSpec::conv2d(4, 3, 3, 1, 1), LayerSpec::batch_norm(3), LayerSpec::relu(),
              LayerSpec::flatten(),             LayerSpec::dense(48, 2)};
  Network net = Network::initialized(s, 3);
  for (double& g : net.param(1, ParamRole::Gamma)) g = 0.9;
  auto g2 = net.param(4, ParamRole::Gamma);
  g2[0] = 1e-4;
  g2[1] = -2e-4;
  g2[2] = 3e-4;  // every gamma of layer 4 lies below the global threshold at ratio 3/7

  bool ok = true;
  const auto plan = plan_prune(net, 3.0 / 7.0);
  ok = ok && plan.over_pruned && plan.over_pruned_layers == std::vector<std::size_t>{4};
  try {
    apply_prune(net, plan);
    ok = false;
  } catch (const OverPrunedError&) {
  }

  // CLI: NA report, exit 0
  fs::create_directories(work);
  save_checkpoint(net, work / "fixture.slim");
  const std::string model = (work / "fixture.slim").string();
  const std::string out = (work / "prune").string();
  const char* argv[] = {"slimkit", "prune", "--model", model.c_str(), "--ratio", "0.43", "--out", out.c_str()};
  std::ostringstream cout_, cerr_;
  const int code = cli_main(8, argv, cout_, cerr_);
  std::ifstream rep(work / "prune" / "report.json");
  const auto report = nlohmann::json::parse(rep, nullptr, false);
  const bool cli_ok = code == 0 && !report.is_discarded() && report.value("status", "") == "NA" &&
                      !report.contains("percent_params_pruned") && !report.contains("accuracy_after_prune");
  ok = ok && cli_ok;

  // Aggregation: one over-pruned seed makes the row NA without numbers
  ExperimentConfig cfg;
  cfg.regularizers = {RegularizerChoice{RegularizerSpec::l1()}};
  cfg.prune_ratios = {3.0 / 7.0};
  CellResult good, bad;
  RatioResult rr;
  rr.ratio = 3.0 / 7.0;
  rr.plan = plan_prune(net, 1.0 / 7.0);
  rr.report = compression_report(net, apply_prune(net, rr.plan), {0.9, 0.9, 0.9});
  good.ratios = {rr};
  bad.seed = 1;
  RatioResult na;
  na.ratio = 3.0 / 7.0;
  na.plan = plan;
  bad.ratios = {na};
  const auto rows = aggregate_cells(cfg, {good, bad});
  ok = ok && rows.size() == 1 && rows[0].na && !rows[0].accuracy_after_prune && rows[0].percent_params_pruned == 0.0;

  o.pass = ok;
  o.detail = std::string("plan over_pruned=") + (plan.over_pruned ? "true" : "false") + " layer " +
             (plan.over_pruned_layers.empty() ? std::string("-") : std::to_string(plan.over_pruned_layers[0])) +
             ", CLI exit " + std::to_string(code) + " status " + report.value("status", "?") + ", aggregate row " +
             (rows[0].na ? "NA" : "ok");
  return o;
}

// ---------------------------------------------------------------------------

struct ReferenceRun {
  ExperimentConfig config;
  PipelineResult result;
  double seconds = 0.0;
  std::string error;
};

const RegularizerSummary* summary_for(const PipelineResult& r, const std::string& label) {
  for (const auto& s : r.summaries) {
    if (s.regularizer == label) return &s;
  }
  return nullptr;
}

const AggregateRow* row_for(const PipelineResult& r, const std::string& label, double ratio) {
  for (const auto& row : r.aggregate) {
    if (row.regularizer == label && row.ratio == ratio) return &row;
  }
  return nullptr;
}

double fraction_below(const RegularizerSummary* s) {
  return s && s->summary && s->summary->total() > 0 ? s->summary->n_below / s->summary->total() : -1.0;
}

Outcome sparsification_trend(const ReferenceRun& run) {
  Outcome o;
  if (!run.error.empty()) return {false, "reference pipeline failed: " + run.error};
  const auto& r = run.result;
  const auto* none = summary_for(r, "none");
  const auto* l1 = summary_for(r, "l1");
  const auto* tl1 = summary_for(r, "tl1(a=0.5)");
  if (!none || !l1 || !tl1) return {false, "reference config lacks none, l1 or tl1(a=0.5)"};
  const double f_none = fraction_below(none), f_l1 = fraction_below(l1), f_tl1 = fraction_below(tl1);

  bool complete = true;
  for (const auto& c : r.cells) complete = complete && c.error.empty() && c.ratios.size() == run.config.prune_ratios.size();

  double common = -1.0;
  for (double ratio : run.config.prune_ratios) {
    const auto* a = row_for(r, "l1", ratio);
    const auto* b = row_for(r, "tl1(a=0.5)", ratio);
    if (a && b && !a->na && !b->na) common = ratio;
  }
  double acc_l1 = -1, acc_tl1 = -1;
  if (common >= 0) {
    acc_l1 = row_for(r, "l1", common)->accuracy_after_prune.value_or(-1);
    acc_tl1 = row_for(r, "tl1(a=0.5)", common)->accuracy_after_prune.value_or(-1);
  }
  const bool a_ok = f_none < f_l1;
  const bool b_ok = f_tl1 >= f_l1;
  const bool c_ok = common >= 0 && acc_tl1 >= acc_l1;
  o.pass = a_ok && b_ok && c_ok && complete && run.config.seeds.size() >= 3;
  o.detail = std::to_string(run.config.seeds.size()) + " seeds; (a) frac<=1e-6 none " + fmt("%.3f", f_none) +
             " < l1 " + fmt("%.3f", f_l1) + (a_ok ? " ok" : " FAIL") + "; (b) tl1(0.5) " + fmt("%.3f", f_tl1) +
             " >= l1" + (b_ok ? " ok" : " FAIL") + "; (c) at ratio " + fmt("%.2f", common) + " pre-retrain acc tl1 " +
             fmt("%.4f", acc_tl1) + " >= l1 " + fmt("%.4f", acc_l1) + (c_ok ? " ok" : " FAIL");
  o.detail += ", pipeline " + fmt("%.1f", run.seconds) + " s";
  if (run.seconds > kBudgetTrend) {
    o.pass = false;
    o.detail += " over budget";
  }
  return o;
}

Outcome retraining_recovery(const ReferenceRun& run) {
  Outcome o;
  if (!run.error.empty()) return {false, "reference pipeline failed: " + run.error};
  if (!run.config.retrain) return {false, "reference config has no retrain stage"};
  int checked = 0, failures = 0;
  double worst_gap = -1.0;
  std::string worst_label;
  for (const auto& reg : run.config.regularizers) {
    if (!reg.spec) continue;  // only regularized models
    const auto* row = row_for(run.result, reg.label(), kRecoveryRatio);
    ++checked;
    if (!row || row->na || !row->accuracy_after_retrain || !row->accuracy_before_prune) {
      ++failures;
      continue;
    }
    const double gap = *row->accuracy_before_prune - *row->accuracy_after_retrain;
    if (gap > worst_gap) {
      worst_gap = gap;
      worst_label = reg.label();
    }
    if (gap > kRecoveryPoints) ++failures;
  }
  o.pass = checked > 0 && failures == 0;
  o.detail = std::to_string(checked) + " regularizers at ratio " + fmt("%.1f", kRecoveryRatio) +
             ", largest mean accuracy gap " + fmt("%.4f", worst_gap) + " (" + worst_label + "), tolerance " +
             fmt("%.2f", kRecoveryPoints);
  return o;
}

Outcome determinism(const fs::path& smoke, const fs::path& work) {
  Outcome o;
  const auto cfg = load_config(smoke);
  const auto data = load_datasets(cfg);
  const fs::path a = work / "determinism_a", b = work / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  write_pipeline_outputs(run_pipeline(cfg, data, 1), cfg, a);
  write_pipeline_outputs(run_pipeline(cfg, load_datasets(cfg), thread_cap_from_env()), cfg, b);
  int files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    auto read = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    if (!fs::exists(b / entry.path().filename()) || read(entry.path()) != read(b / entry.path().filename())) {
      ++differing;
    }
  }
  o.pass = files >= 6 && differing == 0;
  o.detail = std::to_string(files) + " report files compared across two runs, " + std::to_string(differing) +
             " differ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slimkit acceptance suite"};
  std::string config = SLIMKIT_SOURCE_DIR "/configs/reference.json";
  std::string smoke = SLIMKIT_SOURCE_DIR "/configs/smoke.json";
  std::string work = (fs::temp_directory_path() / "slimkit_acceptance").string();
  app.add_option("--config", config, "Reference experiment config");
  app.add_option("--smoke", smoke, "Small config used for the rerun comparison");
  app.add_option("--work", work, "Scratch directory for pipeline outputs");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };

  ReferenceRun ref;
  bool ref_done = false;
  auto reference = [&]() -> const ReferenceRun& {
    if (!ref_done) {
      ref_done = true;
      Stopwatch sw;
      try {
        ref.config = load_config(config);
        const auto data = load_datasets(ref.config);
        ref.result = run_pipeline(ref.config, data, thread_cap_from_env());
        write_pipeline_outputs(ref.result, ref.config, fs::path(work) / "reference");
      } catch (const std::exception& e) {
        ref.error = e.what();
      }
      ref.seconds = sw.seconds();
    }
    return ref;
  };

  const std::vector<Criterion> criteria{
      {1, "subgradient correctness", subgradient_correctness},
      {2, "interpolation limits", interpolation_limits},
      {3, "MCP/SCAD saturation", saturation},
      {4, "gradient check", gradient_check},
      {5, "prune-count exactness", prune_count_exactness},
      {6, "surgery equivalence", surgery_equivalence},
      {7, "metric formulas", metric_formulas},
      {8, "over-pruned (NA) detection", [&] { return over_pruned_detection(fs::path(work) / "na"); }},
      {9, "desk-scale sparsification trend", [&] { return sparsification_trend(reference()); }},
      {10, "retraining recovery", [&] { return retraining_recovery(reference()); }},
      {11, "determinism", [&] { return determinism(smoke, work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d  %-32s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
