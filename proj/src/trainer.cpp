#include "slimkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "slimkit/errors.hpp"
#include "slimkit/kernels.hpp"
#include "slimkit/rng.hpp"

namespace slim {

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw InvalidInput("lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidInput("weight_decay must be >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be >= 0");
  if (!(lr_drop_factor > 0.0) || !std::isfinite(lr_drop_factor)) {
    throw InvalidInput("lr_drop_factor must be > 0");
  }
  for (double d : lr_drop_points) {
    if (!(d >= 0.0 && d <= 1.0)) throw InvalidInput("lr_drop_points must lie in [0, 1]");
  }
}

double lr_at(const TrainConfig& config, int epoch) {
  double lr = config.lr0;
  for (double d : config.lr_drop_points) {
    if (epoch >= static_cast<int>(std::floor(d * config.epochs))) lr /= config.lr_drop_factor;
  }
  return lr;
}

OptimizerState OptimizerState::zeros_like(const Network& net) {
  OptimizerState s;
  s.velocity.resize(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    for (const Param& p : net.layer(i).params) s.velocity[i].emplace_back(p.value.size(), 0.0);
  }
  return s;
}

void sgd_step(Network& net, const Gradients& grads, OptimizerState& state, const SgdOptions& opt) {
  if (grads.params.size() != net.layer_count() || state.velocity.size() != net.layer_count()) {
    throw StateError("gradient/optimizer state does not match the network");
  }
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& params = net.layer(i).params;
    if (grads.params[i].size() != params.size() || state.velocity[i].size() != params.size()) {
      throw StateError("gradient/optimizer state does not match layer " + std::to_string(i));
    }
    for (std::size_t j = 0; j < params.size(); ++j) {
      const auto& g = grads.params[i][j];
      if (g.size() != params[j].value.size() || state.velocity[i][j].size() != g.size()) {
        throw StateError("gradient shape does not match parameter in layer " + std::to_string(i));
      }
      for (double v : g) {
        if (!std::isfinite(v)) throw DivergenceError("non-finite gradient");
      }
    }
  }
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const bool is_bn = net.spec().layers[i].kind == LayerKind::BatchNorm;
    const double wd = (is_bn && !opt.decay_batchnorm) ? 0.0 : opt.weight_decay;
    auto& params = net.layer(i).params;
    for (std::size_t j = 0; j < params.size(); ++j) {
      auto& theta = params[j].value;
      kernels::nesterov(theta.data(), grads.params[i][j].data(), state.velocity[i][j].data(),
                        opt.lr, opt.momentum, wd, theta.size());
    }
  }
}

void gamma_subgradient_step(Network& net, const RegularizerSpec& regularizer, double lr,
                            double lambda) {
  const double step = lr * lambda;
  for (std::size_t layer : net.spec().prunable_layers()) {
    auto gamma = net.param(layer, ParamRole::Gamma);
    const auto s = penalty_subgradient(regularizer, gamma, SubgradientPolicy::SelectZero);
    for (std::size_t c = 0; c < gamma.size(); ++c) gamma[c] -= step * s[c];
  }
}

double scaling_penalty(const Network& net, const RegularizerSpec& regularizer, double lambda) {
  double total = 0.0;
  for (std::size_t layer : net.spec().prunable_layers()) {
    total += penalty_value(regularizer, net.param(layer, ParamRole::Gamma));
  }
  return lambda * total;
}

std::vector<double> collect_gammas(const Network& net) {
  std::vector<double> out;
  for (std::size_t layer : net.spec().prunable_layers()) {
    const auto g = net.param(layer, ParamRole::Gamma);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

double accuracy_from_logits(const Tensor4& logits, std::span<const int> labels) {
  const std::size_t k = logits.sample_size();
  if (labels.size() != static_cast<std::size_t>(logits.n)) {
    throw InvalidInput("label count does not match the batch size");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = logits.data.data() + i * k;
    const auto best = static_cast<int>(std::max_element(row, row + k) - row);
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double evaluate(const Network& net, const Dataset& data, int batch_size) {
  if (data.size() == 0) return 0.0;
  data.check_labels(net.spec().classes);
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor4 logits = predict(net, data.gather_images(idx));
    const auto labels = data.gather_labels(idx);
    correct += static_cast<std::size_t>(
        std::lround(accuracy_from_logits(logits, labels) * static_cast<double>(labels.size())));
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

History train(Network& net, const Dataset& train_data, const TrainConfig& config,
              const Dataset* eval, const EpochCallback& on_epoch) {
  config.validate();
  if (train_data.size() == 0) throw InvalidInput("training set is empty");
  train_data.check_labels(net.spec().classes);

  OptimizerState state = OptimizerState::zeros_like(net);
  Rng rng(mix_seed(config.seed, 0x7EA1));
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  History history;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    const SgdOptions opt{lr, config.momentum, config.weight_decay, config.decay_batchnorm};
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor4 x = train_data.gather_images(idx);
      const auto labels = train_data.gather_labels(idx);

      auto fwd = forward(net, x, Mode::Train);
      const LossResult loss = cross_entropy(fwd.output, labels);
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step),
                              epoch, step);
      }
      const Gradients grads = backward(net, fwd.cache, loss.grad_logits);
      try {
        sgd_step(net, grads, state, opt);
      } catch (const DivergenceError&) {
        throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) +
                                  ", step " + std::to_string(step),
                              epoch, step);
      }
      if (config.regularizer && !config.per_epoch_gamma_step) {
        gamma_subgradient_step(net, *config.regularizer, lr, config.lambda);
      }
      loss_sum += loss.loss * static_cast<double>(idx.size());
    }
    if (config.regularizer && config.per_epoch_gamma_step) {
      gamma_subgradient_step(net, *config.regularizer, lr, config.lambda);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.penalty_value = config.regularizer ? scaling_penalty(net, *config.regularizer, config.lambda) : 0.0;
    rec.test_accuracy = evaluate(net, eval ? *eval : train_data);
    history.push_back(rec);
    if (on_epoch) on_epoch(rec, net);
  }
  return history;
}

}  // namespace slim
