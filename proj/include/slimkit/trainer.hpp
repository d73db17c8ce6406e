#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "slimkit/dataset.hpp"
#include "slimkit/network.hpp"
#include "slimkit/regularizers.hpp"

namespace slim {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 64;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// Global regularization strength on the scaling factors.
  double lambda = 0.0;
  /// No regularizer means baseline or retraining mode.
  std::optional<RegularizerSpec> regularizer;
  std::uint64_t seed = 0;
  std::vector<double> lr_drop_points{0.5, 0.75};
  double lr_drop_factor = 10.0;
  /// Apply the scaling-factor step once per epoch instead of after every batch.
  bool per_epoch_gamma_step = false;
  /// Whether weight decay also applies to BatchNorm gamma and beta.
  bool decay_batchnorm = true;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

/// Piecewise-constant step schedule: lr0 divided by lr_drop_factor once for
/// every drop point d with epoch >= floor(d * epochs).
double lr_at(const TrainConfig& config, int epoch);

/// Velocity buffers, zero-initialized, one per parameter tensor.
struct OptimizerState {
  std::vector<std::vector<std::vector<double>>> velocity;

  static OptimizerState zeros_like(const Network& net);
};

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  bool decay_batchnorm = true;
};

/// Nesterov momentum without dampening on every parameter:
///   g = grad + wd * theta; v = mu * v + g; theta -= lr * (g + mu * v)
/// Throws DivergenceError on a non-finite gradient, leaving `net` untouched.
void sgd_step(Network& net, const Gradients& grads, OptimizerState& state, const SgdOptions& opt);

/// gamma <- gamma - lr * lambda * s for every prunable BatchNorm layer, with s
/// the penalty subgradient selecting 0 at the origin. Beta is not touched.
void gamma_subgradient_step(Network& net, const RegularizerSpec& regularizer, double lr,
                            double lambda);

/// lambda * sum over prunable layers of R(gamma_l).
double scaling_penalty(const Network& net, const RegularizerSpec& regularizer, double lambda);

/// Every scaling factor of the prunable BatchNorm layers in (layer, channel) order.
std::vector<double> collect_gammas(const Network& net);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double penalty_value = 0.0;
  double test_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

using History = std::vector<EpochRecord>;
using EpochCallback = std::function<void(const EpochRecord&, const Network&)>;

/// Mini-batch training with seeded shuffling. `eval` supplies test_accuracy
/// for the history; when absent, accuracy is measured on `train_data`.
/// Throws DivergenceError (with epoch and step) on a non-finite loss or gradient.
History train(Network& net, const Dataset& train_data, const TrainConfig& config,
              const Dataset* eval = nullptr, const EpochCallback& on_epoch = {});

/// Fraction of argmax-correct predictions in Eval mode; ties resolve to the
/// lowest class index.
double evaluate(const Network& net, const Dataset& data, int batch_size = 256);

/// Argmax accuracy of precomputed logits (one row of `classes` per sample).
double accuracy_from_logits(const Tensor4& logits, std::span<const int> labels);

}  // namespace slim
