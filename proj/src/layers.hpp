#pragma once

// Per-layer forward/backward passes used by network.cpp.

#include <span>
#include <vector>

#include "slimkit/network.hpp"

namespace slim::detail {

Tensor4 conv_forward(const LayerSpec& spec, const Layer& layer, const Tensor4& x,
                     LayerCache* cache);
Tensor4 conv_backward(const LayerSpec& spec, const Layer& layer, const LayerCache& cache,
                      const Tensor4& dy, std::vector<std::vector<double>>& grads);

Tensor4 bn_forward(const LayerSpec& spec, Layer& layer, const Tensor4& x, Mode mode,
                   LayerCache* cache);
Tensor4 bn_forward_eval(const LayerSpec& spec, const Layer& layer, const Tensor4& x);
Tensor4 bn_backward(const LayerSpec& spec, const Layer& layer, const LayerCache& cache,
                    const Tensor4& dy, std::vector<std::vector<double>>& grads);

Tensor4 relu_forward(const Tensor4& x, LayerCache* cache);
Tensor4 relu_backward(const LayerCache& cache, const Tensor4& dy);

Tensor4 max_pool_forward(const LayerSpec& spec, const Tensor4& x, LayerCache* cache);
Tensor4 max_pool_backward(const LayerCache& cache, const Tensor4& dy);

Tensor4 avg_pool_forward(const LayerSpec& spec, const Tensor4& x);
Tensor4 avg_pool_backward(const LayerSpec& spec, const LayerCache& cache, const Tensor4& dy);

Tensor4 dense_forward(const LayerSpec& spec, const Layer& layer, const Tensor4& x,
                      LayerCache* cache);
Tensor4 dense_backward(const LayerSpec& spec, const Layer& layer, const LayerCache& cache,
                       const Tensor4& dy, std::vector<std::vector<double>>& grads);

inline int pool_out(int in, int window, int stride) { return (in - window) / stride + 1; }
inline int conv_out(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace slim::detail
