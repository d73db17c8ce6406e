#include "slimkit/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "layers.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/rng.hpp"

namespace slim {
namespace {

std::uint64_t next_tag() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::string layer_context(std::size_t i, const LayerSpec& spec) {
  return "layer " + std::to_string(i) + " (" + to_string(spec.kind) + ")";
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool has_bias) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  s.has_bias = has_bias;
  return s;
}

LayerSpec LayerSpec::batch_norm(int channels, double eps, double momentum) {
  LayerSpec s;
  s.kind = LayerKind::BatchNorm;
  s.channels = channels;
  s.eps = eps;
  s.momentum = momentum;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::max_pool(int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::avg_pool(int window, int stride) {
  LayerSpec s = max_pool(window, stride);
  s.kind = LayerKind::AvgPool;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec LayerSpec::dense(int in_dim, int out_dim, bool has_bias) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.in_dim = in_dim;
  s.out_dim = out_dim;
  s.has_bias = has_bias;
  return s;
}

std::vector<Shape3> NetworkSpec::infer_shapes() const {
  if (input.c < 1 || input.h < 1 || input.w < 1) throw ShapeError("input shape must be positive");
  std::vector<Shape3> shapes;
  shapes.reserve(layers.size() + 1);
  Shape3 cur = input;
  shapes.push_back(cur);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const auto fail = [&](const std::string& why) {
      throw ShapeError(layer_context(i, l) + ": " + why);
    };
    switch (l.kind) {
      case LayerKind::Conv2d: {
        if (l.in_ch != cur.c) fail("expects " + std::to_string(l.in_ch) + " input channels, got " + std::to_string(cur.c));
        if (l.out_ch < 1 || l.kernel < 1 || l.stride < 1 || l.pad < 0) fail("invalid geometry");
        const int ho = detail::conv_out(cur.h, l.kernel, l.stride, l.pad);
        const int wo = detail::conv_out(cur.w, l.kernel, l.stride, l.pad);
        if (cur.h + 2 * l.pad < l.kernel || cur.w + 2 * l.pad < l.kernel || ho < 1 || wo < 1) {
          fail("kernel larger than padded input");
        }
        cur = {l.out_ch, ho, wo};
        break;
      }
      case LayerKind::BatchNorm:
        if (l.channels != cur.c) fail("expects " + std::to_string(l.channels) + " channels, got " + std::to_string(cur.c));
        if (!(l.eps > 0.0)) fail("eps must be positive");
        if (!(l.momentum >= 0.0 && l.momentum <= 1.0)) fail("momentum must lie in [0, 1]");
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        if (l.window < 1 || l.stride < 1) fail("invalid pooling geometry");
        if (l.window > cur.h || l.window > cur.w) fail("window larger than input");
        cur = {cur.c, detail::pool_out(cur.h, l.window, l.stride),
               detail::pool_out(cur.w, l.window, l.stride)};
        break;
      case LayerKind::Flatten:
        cur = {static_cast<int>(cur.size()), 1, 1};
        break;
      case LayerKind::Dense:
        if (static_cast<std::size_t>(l.in_dim) != cur.size()) {
          fail("expects input dimension " + std::to_string(l.in_dim) + ", got " + std::to_string(cur.size()));
        }
        if (l.out_dim < 1) fail("output dimension must be positive");
        cur = {l.out_dim, 1, 1};
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void NetworkSpec::validate() const {
  const auto shapes = infer_shapes();
  if (classes < 1) throw ShapeError("class count must be positive");
  if (shapes.back().size() != static_cast<std::size_t>(classes)) {
    throw ShapeError("network output has " + std::to_string(shapes.back().size()) +
                     " values per sample but the class count is " + std::to_string(classes));
  }
}

void NetworkSpec::validate_prunable() const {
  validate();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != LayerKind::Conv2d) continue;
    if (i + 1 >= layers.size() || layers[i + 1].kind != LayerKind::BatchNorm) {
      throw ShapeError(layer_context(i, layers[i]) + " is not followed by a batch-norm layer");
    }
  }
}

std::vector<std::size_t> NetworkSpec::prunable_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::BatchNorm && layers[i - 1].kind == LayerKind::Conv2d) {
      out.push_back(i);
    }
  }
  return out;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)), tag_(next_tag()) {
  spec_.validate();
  layers_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    Layer& layer = layers_[i];
    switch (l.kind) {
      case LayerKind::Conv2d:
        layer.params.push_back(
            {ParamRole::Weight,
             std::vector<double>(static_cast<std::size_t>(l.out_ch) * l.in_ch * l.kernel * l.kernel)});
        if (l.has_bias) layer.params.push_back({ParamRole::Bias, std::vector<double>(l.out_ch)});
        break;
      case LayerKind::BatchNorm:
        layer.params.push_back({ParamRole::Gamma, std::vector<double>(l.channels, 1.0)});
        layer.params.push_back({ParamRole::Beta, std::vector<double>(l.channels, 0.0)});
        layer.running_mean.assign(l.channels, 0.0);
        layer.running_var.assign(l.channels, 1.0);
        break;
      case LayerKind::Dense:
        layer.params.push_back(
            {ParamRole::Weight, std::vector<double>(static_cast<std::size_t>(l.out_dim) * l.in_dim)});
        if (l.has_bias) layer.params.push_back({ParamRole::Bias, std::vector<double>(l.out_dim)});
        break;
      default:
        break;
    }
  }
}

Network::Network(const Network& other)
    : spec_(other.spec_), layers_(other.layers_), tag_(next_tag()) {}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    spec_ = other.spec_;
    layers_ = other.layers_;
    tag_ = next_tag();
  }
  return *this;
}

Network Network::initialized(NetworkSpec spec, std::uint64_t seed, double gamma_init) {
  Network net(std::move(spec));
  Rng rng(seed);
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    const LayerSpec& l = net.spec_.layers[i];
    Layer& layer = net.layers_[i];
    if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::Dense) {
      const double fan_in = l.kind == LayerKind::Conv2d
                                ? static_cast<double>(l.in_ch) * l.kernel * l.kernel
                                : static_cast<double>(l.in_dim);
      const double std_dev = std::sqrt(2.0 / fan_in);
      for (double& w : layer.params[0].value) w = std_dev * rng.normal();
    } else if (l.kind == LayerKind::BatchNorm) {
      std::fill(layer.params[0].value.begin(), layer.params[0].value.end(), gamma_init);
    }
  }
  return net;
}

bool Network::has_param(std::size_t layer, ParamRole role) const {
  const auto& params = layers_.at(layer).params;
  return std::any_of(params.begin(), params.end(), [&](const Param& p) { return p.role == role; });
}

std::span<double> Network::param(std::size_t layer, ParamRole role) {
  for (auto& p : layers_.at(layer).params) {
    if (p.role == role) return p.value;
  }
  throw StateError("layer " + std::to_string(layer) + " has no such parameter");
}

std::span<const double> Network::param(std::size_t layer, ParamRole role) const {
  for (const auto& p : layers_.at(layer).params) {
    if (p.role == role) return p.value;
  }
  throw StateError("layer " + std::to_string(layer) + " has no such parameter");
}

std::span<double> Gradients::of(std::size_t layer, const Network& net, ParamRole role) {
  const auto& ps = net.layer(layer).params;
  for (std::size_t j = 0; j < ps.size(); ++j) {
    if (ps[j].role == role) return params.at(layer).at(j);
  }
  throw StateError("layer " + std::to_string(layer) + " has no such parameter");
}

namespace {

void check_input(const NetworkSpec& spec, const Tensor4& x) {
  if (x.c != spec.input.c || x.h != spec.input.h || x.w != spec.input.w || x.n < 1 ||
      x.data.size() != static_cast<std::size_t>(x.n) * spec.input.size()) {
    throw ShapeError("input tensor (" + std::to_string(x.n) + "," + std::to_string(x.c) + "," +
                     std::to_string(x.h) + "," + std::to_string(x.w) +
                     ") does not match the network input shape");
  }
}

Tensor4 run_layer(const LayerSpec& l, Layer& layer, const Tensor4& x, Mode mode, LayerCache* cache) {
  switch (l.kind) {
    case LayerKind::Conv2d: return detail::conv_forward(l, layer, x, cache);
    case LayerKind::BatchNorm: return detail::bn_forward(l, layer, x, mode, cache);
    case LayerKind::ReLU: return detail::relu_forward(x, cache);
    case LayerKind::MaxPool: return detail::max_pool_forward(l, x, cache);
    case LayerKind::AvgPool: return detail::avg_pool_forward(l, x);
    case LayerKind::Flatten: {
      Tensor4 y = x;
      y.c = static_cast<int>(x.sample_size());
      y.h = 1;
      y.w = 1;
      return y;
    }
    case LayerKind::Dense: return detail::dense_forward(l, layer, x, cache);
  }
  throw StateError("unknown layer kind");
}

}  // namespace

ForwardResult forward(Network& net, const Tensor4& x, Mode mode) {
  check_input(net.spec(), x);
  ForwardResult result;
  result.cache.mode = mode;
  result.cache.network_tag = net.tag();
  result.cache.batch = x.n;
  result.cache.layers.resize(net.layer_count());
  Tensor4 cur = x;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const LayerSpec& l = net.spec().layers[i];
    LayerCache& lc = result.cache.layers[i];
    lc.in_shape = {cur.c, cur.h, cur.w};
    cur = run_layer(l, net.layer(i), cur, mode, &lc);
  }
  result.output = std::move(cur);
  return result;
}

Tensor4 predict(const Network& net, const Tensor4& x) {
  check_input(net.spec(), x);
  Tensor4 cur = x;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const LayerSpec& l = net.spec().layers[i];
    if (l.kind == LayerKind::BatchNorm) {
      cur = detail::bn_forward_eval(l, net.layer(i), cur);
    } else {
      // Only BatchNorm mutates its layer, and only in Train mode.
      cur = run_layer(l, const_cast<Layer&>(net.layer(i)), cur, Mode::Eval, nullptr);
    }
  }
  return cur;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor4& grad_output) {
  if (cache.network_tag != net.tag() || cache.layers.size() != net.layer_count()) {
    throw StateError("forward cache belongs to a different network");
  }
  if (cache.mode != Mode::Train) throw StateError("backward requires a Train-mode forward cache");
  if (grad_output.n != cache.batch) throw StateError("gradient batch size does not match cache");

  Gradients grads;
  grads.params.resize(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    grads.params[i].resize(net.layer(i).params.size());
  }
  Tensor4 g = grad_output;
  for (std::size_t ii = net.layer_count(); ii-- > 0;) {
    const LayerSpec& l = net.spec().layers[ii];
    const Layer& layer = net.layer(ii);
    const LayerCache& lc = cache.layers[ii];
    auto& pg = grads.params[ii];
    switch (l.kind) {
      case LayerKind::Conv2d: g = detail::conv_backward(l, layer, lc, g, pg); break;
      case LayerKind::BatchNorm: g = detail::bn_backward(l, layer, lc, g, pg); break;
      case LayerKind::ReLU: g = detail::relu_backward(lc, g); break;
      case LayerKind::MaxPool: g = detail::max_pool_backward(lc, g); break;
      case LayerKind::AvgPool: g = detail::avg_pool_backward(l, lc, g); break;
      case LayerKind::Flatten:
        g.c = lc.in_shape.c;
        g.h = lc.in_shape.h;
        g.w = lc.in_shape.w;
        break;
      case LayerKind::Dense: g = detail::dense_backward(l, layer, lc, g, pg); break;
    }
  }
  grads.input = std::move(g);
  return grads;
}

LossResult cross_entropy(const Tensor4& logits, std::span<const int> labels) {
  const int n = logits.n;
  const auto k = static_cast<int>(logits.sample_size());
  if (n < 1 || static_cast<std::size_t>(n) != labels.size()) {
    throw InvalidInput("label count does not match the batch size");
  }
  LossResult out;
  out.grad_logits = Tensor4(logits.n, logits.c, logits.h, logits.w);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= k) throw InvalidInput("label " + std::to_string(label) + " out of range");
    const double* row = logits.data.data() + static_cast<std::size_t>(i) * k;
    double* grow = out.grad_logits.data.data() + static_cast<std::size_t>(i) * k;
    const double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) {
      grow[j] = std::exp(row[j] - mx);
      denom += grow[j];
    }
    total += std::log(denom) - (row[label] - mx);
    for (int j = 0; j < k; ++j) grow[j] = grow[j] / denom / n;
    grow[label] -= 1.0 / n;
  }
  out.loss = total / n;
  return out;
}

std::int64_t count_params(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv2d:
        total += static_cast<std::int64_t>(l.out_ch) * l.in_ch * l.kernel * l.kernel;
        if (l.has_bias) total += l.out_ch;
        break;
      case LayerKind::BatchNorm:
        total += 2 * static_cast<std::int64_t>(l.channels);
        break;
      case LayerKind::Dense:
        total += static_cast<std::int64_t>(l.out_dim) * l.in_dim;
        if (l.has_bias) total += l.out_dim;
        break;
      default:
        break;
    }
  }
  return total;
}

std::int64_t count_params(const Network& net) { return count_params(net.spec()); }

std::int64_t count_flops(const NetworkSpec& spec) {
  if (spec.layers.empty()) return 0;
  const auto shapes = spec.infer_shapes();
  std::int64_t total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const Shape3& out = shapes[i + 1];
    switch (l.kind) {
      case LayerKind::Conv2d:
        total += 2LL * l.kernel * l.kernel * l.in_ch * l.out_ch * out.h * out.w;
        break;
      case LayerKind::Dense:
        total += 2LL * l.in_dim * l.out_dim;
        break;
      case LayerKind::BatchNorm:
        total += 2LL * static_cast<std::int64_t>(out.size());
        break;
      default:
        break;
    }
  }
  return total;
}

std::int64_t count_flops(const Network& net) { return count_flops(net.spec()); }

}  // namespace slim
