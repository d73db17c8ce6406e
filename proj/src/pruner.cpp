#include "slimkit/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "slimkit/errors.hpp"

namespace slim {

std::size_t prune_count(double ratio, std::size_t total) {
  const double exact = ratio * static_cast<double>(total);
  auto count = static_cast<std::size_t>(std::floor(exact + 1e-9));
  return std::min(count, total);
}

PrunePlan plan_prune(const Network& net, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw InvalidInput("pruning ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
  const auto layers = net.spec().prunable_layers();
  if (layers.empty()) throw InvalidInput("network has no prunable batch-norm layer");

  struct Entry {
    std::size_t mask;
    std::size_t channel;
    double magnitude;
  };
  PrunePlan plan;
  plan.ratio = ratio;
  std::vector<Entry> entries;
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const auto gamma = net.param(layers[m], ParamRole::Gamma);
    plan.keep_masks.push_back({layers[m], std::vector<bool>(gamma.size(), true)});
    for (std::size_t c = 0; c < gamma.size(); ++c) entries.push_back({m, c, std::fabs(gamma[c])});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.magnitude < b.magnitude; });

  plan.total_channels = entries.size();
  plan.pruned_channel_count = prune_count(ratio, entries.size());
  for (std::size_t i = 0; i < plan.pruned_channel_count; ++i) {
    plan.keep_masks[entries[i].mask].keep[entries[i].channel] = false;
  }
  plan.threshold = plan.pruned_channel_count > 0 ? entries[plan.pruned_channel_count - 1].magnitude : 0.0;
  for (const auto& m : plan.keep_masks) {
    if (std::none_of(m.keep.begin(), m.keep.end(), [](bool k) { return k; })) {
      plan.over_pruned_layers.push_back(m.layer);
    }
  }
  plan.over_pruned = !plan.over_pruned_layers.empty();
  return plan;
}

namespace {

std::map<std::size_t, const std::vector<bool>*> check_plan(const Network& net, const PrunePlan& plan) {
  const auto layers = net.spec().prunable_layers();
  if (plan.keep_masks.size() != layers.size()) {
    throw StateError("prune plan does not match the network's prunable layers");
  }
  std::map<std::size_t, const std::vector<bool>*> masks;
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const auto& mask = plan.keep_masks[m];
    if (mask.layer != layers[m] ||
        mask.keep.size() != static_cast<std::size_t>(net.spec().layers[mask.layer].channels)) {
      throw StateError("prune plan mask " + std::to_string(m) + " does not match the network");
    }
    masks[mask.layer] = &mask.keep;
  }
  return masks;
}

std::vector<double> select(const std::vector<double>& v, const std::vector<bool>& keep) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (keep[i]) out.push_back(v[i]);
  }
  return out;
}

int count_kept(const std::vector<bool>& keep) {
  return static_cast<int>(std::count(keep.begin(), keep.end(), true));
}

std::vector<double>& param_ref(Layer& layer, ParamRole role) {
  for (auto& p : layer.params) {
    if (p.role == role) return p.value;
  }
  throw StateError("layer is missing a parameter");
}

const std::vector<double>& param_ref(const Layer& layer, ParamRole role) {
  for (const auto& p : layer.params) {
    if (p.role == role) return p.value;
  }
  throw StateError("layer is missing a parameter");
}

}  // namespace

Network apply_prune(const Network& net, const PrunePlan& plan) {
  const auto masks = check_plan(net, plan);
  if (plan.over_pruned) {
    std::string which;
    for (auto l : plan.over_pruned_layers) which += (which.empty() ? "" : ", ") + std::to_string(l);
    throw OverPrunedError("plan removes every channel of layer(s) " + which);
  }

  const NetworkSpec& spec = net.spec();
  const auto shapes = spec.infer_shapes();
  NetworkSpec out_spec = spec;
  // New values per layer, filled in the same order as Network allocates them.
  std::vector<Layer> out_layers(spec.layers.size());

  std::vector<bool> carry(spec.input.c, true);  // keep-mask over the current channel axis
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerSpec& nl = out_spec.layers[i];
    const Layer& src = net.layer(i);
    Layer& dst = out_layers[i];
    switch (l.kind) {
      case LayerKind::Conv2d: {
        std::vector<bool> out_keep(l.out_ch, true);
        if (auto it = masks.find(i + 1); it != masks.end()) out_keep = *it->second;
        const std::size_t kk = static_cast<std::size_t>(l.kernel) * l.kernel;
        const auto& w = param_ref(src, ParamRole::Weight);
        std::vector<double> nw;
        for (int o = 0; o < l.out_ch; ++o) {
          if (!out_keep[o]) continue;
          for (int c = 0; c < l.in_ch; ++c) {
            if (!carry[c]) continue;
            const auto* block = w.data() + (static_cast<std::size_t>(o) * l.in_ch + c) * kk;
            nw.insert(nw.end(), block, block + kk);
          }
        }
        dst.params.push_back({ParamRole::Weight, std::move(nw)});
        if (l.has_bias) dst.params.push_back({ParamRole::Bias, select(param_ref(src, ParamRole::Bias), out_keep)});
        nl.in_ch = count_kept(carry);
        nl.out_ch = count_kept(out_keep);
        carry = std::move(out_keep);
        break;
      }
      case LayerKind::BatchNorm:
        dst.params.push_back({ParamRole::Gamma, select(param_ref(src, ParamRole::Gamma), carry)});
        dst.params.push_back({ParamRole::Beta, select(param_ref(src, ParamRole::Beta), carry)});
        dst.running_mean = select(src.running_mean, carry);
        dst.running_var = select(src.running_var, carry);
        nl.channels = count_kept(carry);
        break;
      case LayerKind::Flatten: {
        const std::size_t plane = static_cast<std::size_t>(shapes[i].h) * shapes[i].w;
        std::vector<bool> expanded(carry.size() * plane);
        for (std::size_t c = 0; c < carry.size(); ++c) {
          std::fill_n(expanded.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, carry[c]);
        }
        carry = std::move(expanded);
        break;
      }
      case LayerKind::Dense: {
        const auto& w = param_ref(src, ParamRole::Weight);
        std::vector<double> nw;
        for (int o = 0; o < l.out_dim; ++o) {
          for (int c = 0; c < l.in_dim; ++c) {
            if (carry[c]) nw.push_back(w[static_cast<std::size_t>(o) * l.in_dim + c]);
          }
        }
        dst.params.push_back({ParamRole::Weight, std::move(nw)});
        if (l.has_bias) dst.params.push_back({ParamRole::Bias, param_ref(src, ParamRole::Bias)});
        nl.in_dim = count_kept(carry);
        carry.assign(l.out_dim, true);
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        break;
    }
  }

  Network out(std::move(out_spec));
  for (std::size_t i = 0; i < out.layer_count(); ++i) {
    Layer& target = out.layer(i);
    for (std::size_t j = 0; j < target.params.size(); ++j) {
      if (target.params[j].value.size() != out_layers[i].params[j].value.size()) {
        throw StateError("internal: pruned parameter size mismatch in layer " + std::to_string(i));
      }
      target.params[j].value = std::move(out_layers[i].params[j].value);
    }
    if (!target.running_mean.empty()) {
      target.running_mean = std::move(out_layers[i].running_mean);
      target.running_var = std::move(out_layers[i].running_var);
    }
  }
  return out;
}

Network mask_pruned_channels(const Network& net, const PrunePlan& plan) {
  check_plan(net, plan);
  Network out = net;
  for (const auto& m : plan.keep_masks) {
    auto& layer = out.layer(m.layer);
    auto& gamma = param_ref(layer, ParamRole::Gamma);
    auto& beta = param_ref(layer, ParamRole::Beta);
    for (std::size_t c = 0; c < m.keep.size(); ++c) {
      if (!m.keep[c]) {
        gamma[c] = 0.0;
        beta[c] = 0.0;
      }
    }
  }
  return out;
}

double percent_pruned(std::int64_t before, std::int64_t after) {
  if (before == 0) return 0.0;
  return (1.0 - static_cast<double>(after) / static_cast<double>(before)) * 100.0;
}

CompressionReport compression_report(const Network& before, const Network& after,
                                     const ReportAccuracies& accuracies) {
  CompressionReport r;
  r.params_before = count_params(before);
  r.params_after = count_params(after);
  r.flops_before = count_flops(before);
  r.flops_after = count_flops(after);
  r.percent_params_pruned = percent_pruned(r.params_before, r.params_after);
  r.percent_flops_pruned = percent_pruned(r.flops_before, r.flops_after);
  r.accuracy_before_prune = accuracies.before_prune;
  r.accuracy_after_prune = accuracies.after_prune;
  r.accuracy_after_retrain = accuracies.after_retrain;
  return r;
}

}  // namespace slim
