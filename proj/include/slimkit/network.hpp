#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slimkit/tensor.hpp"

namespace slim {

enum class LayerKind { Conv2d, BatchNorm, ReLU, MaxPool, AvgPool, Flatten, Dense };

std::string to_string(LayerKind kind);

/// Declarative description of one layer. Only the fields relevant to `kind`
/// are meaningful; the rest stay at their defaults.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;

  // Conv2d (stride is shared with the pooling layers)
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  bool has_bias = false;  // Conv2d and Dense

  // BatchNorm
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;  // running-statistics EMA weight of the new batch

  // Dense
  int in_dim = 0;
  int out_dim = 0;

  // MaxPool / AvgPool
  int window = 0;

  static LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride = 1, int pad = 0,
                          bool has_bias = false);
  static LayerSpec batch_norm(int channels, double eps = 1e-5, double momentum = 0.1);
  static LayerSpec relu();
  static LayerSpec max_pool(int window, int stride);
  static LayerSpec avg_pool(int window, int stride);
  static LayerSpec flatten();
  static LayerSpec dense(int in_dim, int out_dim, bool has_bias = true);

  bool operator==(const LayerSpec&) const = default;
};

struct Shape3 {
  int c = 0;
  int h = 0;
  int w = 0;
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool operator==(const Shape3&) const = default;
};

struct NetworkSpec {
  Shape3 input;
  int classes = 0;
  std::vector<LayerSpec> layers;

  /// Activation shape entering each layer; element L is the network output.
  /// Throws ShapeError when adjacent layers do not fit together.
  std::vector<Shape3> infer_shapes() const;

  /// Shape inference succeeds and the flattened output has `classes` entries.
  void validate() const;

  /// validate() plus: every Conv2d is immediately followed by a BatchNorm.
  void validate_prunable() const;

  /// Indices of BatchNorm layers that directly follow a Conv2d. Their scaling
  /// factors are the ones regularized and pruned.
  std::vector<std::size_t> prunable_layers() const;

  bool operator==(const NetworkSpec&) const = default;
};

enum class ParamRole { Weight, Bias, Gamma, Beta };

struct Param {
  ParamRole role;
  std::vector<double> value;
};

struct Layer {
  std::vector<Param> params;
  // BatchNorm inference statistics (biased batch variance, without eps).
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

class Network {
 public:
  Network() = default;
  /// Allocates parameters for a validated spec: weights and biases 0, gamma 1,
  /// beta 0, running mean 0, running variance 1.
  explicit Network(NetworkSpec spec);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// He-normal (fan-in) weights, zero biases, gamma = gamma_init, beta = 0.
  static Network initialized(NetworkSpec spec, std::uint64_t seed, double gamma_init = 0.5);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return layers_.at(i); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  bool has_param(std::size_t layer, ParamRole role) const;
  /// Throws StateError when the layer has no parameter with that role.
  std::span<double> param(std::size_t layer, ParamRole role);
  std::span<const double> param(std::size_t layer, ParamRole role) const;

  /// Identity used to detect caches produced by a different network object.
  std::uint64_t tag() const noexcept { return tag_; }

 private:
  NetworkSpec spec_;
  std::vector<Layer> layers_;
  std::uint64_t tag_ = 0;
};

enum class Mode { Train, Eval };

struct LayerCache {
  Shape3 in_shape;
  Tensor4 input;                  // ReLU, Dense
  std::vector<double> aux;        // Conv2d im2col columns, BatchNorm normalized values
  std::vector<double> aux2;       // BatchNorm 1/sigma per channel
  std::vector<std::size_t> index; // MaxPool argmax positions
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  std::uint64_t network_tag = 0;
  int batch = 0;
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Tensor4 output;
  ForwardCache cache;
};

/// Train mode normalizes with batch statistics and updates the running
/// statistics; Eval mode uses the running statistics. Throws ShapeError when
/// `x` does not match the input shape.
ForwardResult forward(Network& net, const Tensor4& x, Mode mode);

/// Eval-mode forward without caches.
Tensor4 predict(const Network& net, const Tensor4& x);

struct Gradients {
  std::vector<std::vector<std::vector<double>>> params;  // [layer][param]
  Tensor4 input;

  std::span<double> of(std::size_t layer, const Network& net, ParamRole role);
};

/// Gradients for every parameter and for the input, given dL/d(output).
/// Throws StateError unless `cache` comes from a Train-mode forward of `net`.
Gradients backward(const Network& net, const ForwardCache& cache, const Tensor4& grad_output);

struct LossResult {
  double loss = 0.0;
  Tensor4 grad_logits;
};

/// Mean softmax cross-entropy over the batch. Each sample's output is read as
/// a flat row of `classes` logits. Throws InvalidInput on out-of-range labels.
LossResult cross_entropy(const Tensor4& logits, std::span<const int> labels);

std::int64_t count_params(const NetworkSpec& spec);
std::int64_t count_params(const Network& net);
/// Per-sample forward FLOPs: Conv2d 2*k*k*in*out*Ho*Wo, Dense 2*in*out,
/// BatchNorm 2*C*H*W, everything else 0.
std::int64_t count_flops(const NetworkSpec& spec);
std::int64_t count_flops(const Network& net);

}  // namespace slim
