#include "layers.hpp"

#include <cmath>

#include "slimkit/errors.hpp"
#include "slimkit/kernels.hpp"

namespace slim::detail {

using kernels::Trans;

namespace {

// im2col over the whole batch: rows are (ci, ky, kx), columns are (n, oy, ox).
void im2col(const Tensor4& x, int kernel, int stride, int pad, int ho, int wo,
            std::vector<double>& col) {
  const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
  const std::size_t ncols = plane_out * x.n;
  col.assign(static_cast<std::size_t>(x.c) * kernel * kernel * ncols, 0.0);
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = col.data() + ((static_cast<std::size_t>(ci) * kernel + ky) * kernel + kx) * ncols;
        for (int n = 0; n < x.n; ++n) {
          double* dst = row + n * plane_out;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= x.h) continue;
            const double* src = x.data.data() + x.index(n, ci, iy, 0);
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < x.w) dst[oy * wo + ox] = src[ix];
            }
          }
        }
      }
    }
  }
}

void col2im(const std::vector<double>& col, int kernel, int stride, int pad, int ho, int wo,
            Tensor4& dx) {
  const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
  const std::size_t ncols = plane_out * dx.n;
  for (int ci = 0; ci < dx.c; ++ci) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row =
            col.data() + ((static_cast<std::size_t>(ci) * kernel + ky) * kernel + kx) * ncols;
        for (int n = 0; n < dx.n; ++n) {
          const double* src = row + n * plane_out;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= dx.h) continue;
            double* dst = dx.data.data() + dx.index(n, ci, iy, 0);
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < dx.w) dst[ix] += src[oy * wo + ox];
            }
          }
        }
      }
    }
  }
}

const std::vector<double>& param_of(const Layer& layer, ParamRole role) {
  for (const auto& p : layer.params) {
    if (p.role == role) return p.value;
  }
  throw StateError("layer is missing a parameter");
}

}  // namespace

Tensor4 conv_forward(const LayerSpec& spec, const Layer& layer, const Tensor4& x,
                     LayerCache* cache) {
  const int ho = conv_out(x.h, spec.kernel, spec.stride, spec.pad);
  const int wo = conv_out(x.w, spec.kernel, spec.stride, spec.pad);
  const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
  const std::size_t ncols = plane_out * x.n;
  const std::size_t depth = static_cast<std::size_t>(spec.in_ch) * spec.kernel * spec.kernel;

  std::vector<double> col;
  im2col(x, spec.kernel, spec.stride, spec.pad, ho, wo, col);

  const auto& weight = param_of(layer, ParamRole::Weight);
  std::vector<double> ymat(static_cast<std::size_t>(spec.out_ch) * ncols);
  kernels::gemm(Trans::No, Trans::No, spec.out_ch, ncols, depth, weight.data(), depth, col.data(),
                ncols, 0.0, ymat.data(), ncols);

  Tensor4 y(x.n, spec.out_ch, ho, wo);
  const std::vector<double>* bias = spec.has_bias ? &param_of(layer, ParamRole::Bias) : nullptr;
  for (int n = 0; n < x.n; ++n) {
    for (int o = 0; o < spec.out_ch; ++o) {
      const double* src = ymat.data() + o * ncols + n * plane_out;
      double* dst = y.data.data() + y.index(n, o, 0, 0);
      const double b = bias ? (*bias)[o] : 0.0;
      for (std::size_t i = 0; i < plane_out; ++i) dst[i] = src[i] + b;
    }
  }
  if (cache) cache->aux = std::move(col);
  return y;
}

Tensor4 conv_backward(const LayerSpec& spec, const Layer& layer, const LayerCache& cache,
                      const Tensor4& dy, std::vector<std::vector<double>>& grads) {
  const int ho = dy.h;
  const int wo = dy.w;
  const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
  const std::size_t ncols = plane_out * dy.n;
  const std::size_t depth = static_cast<std::size_t>(spec.in_ch) * spec.kernel * spec.kernel;
  if (cache.aux.size() != depth * ncols) throw StateError("conv cache does not match gradient");

  std::vector<double> dymat(static_cast<std::size_t>(spec.out_ch) * ncols);
  for (int n = 0; n < dy.n; ++n) {
    for (int o = 0; o < spec.out_ch; ++o) {
      const double* src = dy.data.data() + dy.index(n, o, 0, 0);
      double* dst = dymat.data() + o * ncols + n * plane_out;
      for (std::size_t i = 0; i < plane_out; ++i) dst[i] = src[i];
    }
  }

  auto& dw = grads[0];
  dw.assign(static_cast<std::size_t>(spec.out_ch) * depth, 0.0);
  kernels::gemm(Trans::No, Trans::Yes, spec.out_ch, depth, ncols, dymat.data(), ncols,
                cache.aux.data(), ncols, 0.0, dw.data(), depth);
  if (spec.has_bias) {
    auto& db = grads[1];
    db.assign(spec.out_ch, 0.0);
    for (int o = 0; o < spec.out_ch; ++o) db[o] = kernels::sum(dymat.data() + o * ncols, ncols);
  }

  const auto& weight = param_of(layer, ParamRole::Weight);
  std::vector<double> dcol(depth * ncols);
  kernels::gemm(Trans::Yes, Trans::No, depth, ncols, spec.out_ch, weight.data(), depth,
                dymat.data(), ncols, 0.0, dcol.data(), ncols);
  Tensor4 dx(dy.n, cache.in_shape.c, cache.in_shape.h, cache.in_shape.w);
  col2im(dcol, spec.kernel, spec.stride, spec.pad, ho, wo, dx);
  return dx;
}

Tensor4 bn_forward(const LayerSpec& spec, Layer& layer, const Tensor4& x, Mode mode,
                   LayerCache* cache) {
  if (mode == Mode::Eval) return bn_forward_eval(spec, layer, x);
  const auto& gamma = param_of(layer, ParamRole::Gamma);
  const auto& beta = param_of(layer, ParamRole::Beta);
  const std::size_t plane = x.plane();
  const double count = static_cast<double>(plane) * x.n;

  Tensor4 y(x.n, x.c, x.h, x.w);
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(x.c);
  for (int c = 0; c < x.c; ++c) {
    double total = 0.0;
    for (int n = 0; n < x.n; ++n) total += kernels::sum(x.data.data() + x.index(n, c, 0, 0), plane);
    const double mean = total / count;
    double sq = 0.0;
    for (int n = 0; n < x.n; ++n) {
      sq += kernels::sum_sq_dev(x.data.data() + x.index(n, c, 0, 0), mean, plane);
    }
    const double var = sq / count;
    const double inv = 1.0 / std::sqrt(var + spec.eps);
    inv_std[c] = inv;
    for (int n = 0; n < x.n; ++n) {
      const std::size_t off = x.index(n, c, 0, 0);
      kernels::normalize(x.data.data() + off, mean, inv, xhat.data() + off, plane);
      kernels::affine(xhat.data() + off, gamma[c], beta[c], y.data.data() + off, plane);
    }
    layer.running_mean[c] = (1.0 - spec.momentum) * layer.running_mean[c] + spec.momentum * mean;
    layer.running_var[c] = (1.0 - spec.momentum) * layer.running_var[c] + spec.momentum * var;
  }
  if (cache) {
    cache->aux = std::move(xhat);
    cache->aux2 = std::move(inv_std);
  }
  return y;
}

Tensor4 bn_forward_eval(const LayerSpec& spec, const Layer& layer, const Tensor4& x) {
  const auto& gamma = param_of(layer, ParamRole::Gamma);
  const auto& beta = param_of(layer, ParamRole::Beta);
  const std::size_t plane = x.plane();
  Tensor4 y(x.n, x.c, x.h, x.w);
  for (int c = 0; c < x.c; ++c) {
    const double inv = 1.0 / std::sqrt(layer.running_var[c] + spec.eps);
    const double scale = gamma[c] * inv;
    const double shift = beta[c] - layer.running_mean[c] * scale;
    for (int n = 0; n < x.n; ++n) {
      const std::size_t off = x.index(n, c, 0, 0);
      kernels::affine(x.data.data() + off, scale, shift, y.data.data() + off, plane);
    }
  }
  return y;
}

Tensor4 bn_backward(const LayerSpec& /*spec*/, const Layer& layer, const LayerCache& cache,
                    const Tensor4& dy, std::vector<std::vector<double>>& grads) {
  if (cache.aux.size() != dy.size() || cache.aux2.size() != static_cast<std::size_t>(dy.c)) {
    throw StateError("batch-norm cache does not match gradient");
  }
  const auto& gamma = param_of(layer, ParamRole::Gamma);
  const std::size_t plane = dy.plane();
  const double count = static_cast<double>(plane) * dy.n;
  auto& dgamma = grads[0];
  auto& dbeta = grads[1];
  dgamma.assign(dy.c, 0.0);
  dbeta.assign(dy.c, 0.0);
  Tensor4 dx(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < dy.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < dy.n; ++n) {
      const std::size_t off = dy.index(n, c, 0, 0);
      sum_dy += kernels::sum(dy.data.data() + off, plane);
      sum_dy_xhat += kernels::dot(dy.data.data() + off, cache.aux.data() + off, plane);
    }
    dbeta[c] = sum_dy;
    dgamma[c] = sum_dy_xhat;
    // dx = gamma/sigma * (dy - mean(dy) - xhat * mean(dy * xhat))
    const double k = gamma[c] * cache.aux2[c];
    for (int n = 0; n < dy.n; ++n) {
      const std::size_t off = dy.index(n, c, 0, 0);
      kernels::lincomb(k, dy.data.data() + off, -k * sum_dy_xhat / count,
                       cache.aux.data() + off, -k * sum_dy / count, dx.data.data() + off, plane);
    }
  }
  return dx;
}

Tensor4 relu_forward(const Tensor4& x, LayerCache* cache) {
  Tensor4 y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  if (cache) cache->input = x;
  return y;
}

Tensor4 relu_backward(const LayerCache& cache, const Tensor4& dy) {
  if (!cache.input.same_shape(dy)) throw StateError("relu cache does not match gradient");
  Tensor4 dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(cache.input.data[i] > 0.0)) dx.data[i] = 0.0;
  }
  return dx;
}

Tensor4 max_pool_forward(const LayerSpec& spec, const Tensor4& x, LayerCache* cache) {
  const int ho = pool_out(x.h, spec.window, spec.stride);
  const int wo = pool_out(x.w, spec.window, spec.stride);
  Tensor4 y(x.n, x.c, ho, wo);
  std::vector<std::size_t> argmax(y.size());
  std::size_t out = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++out) {
          std::size_t best = x.index(n, c, oy * spec.stride, ox * spec.stride);
          for (int ky = 0; ky < spec.window; ++ky) {
            for (int kx = 0; kx < spec.window; ++kx) {
              const std::size_t idx = x.index(n, c, oy * spec.stride + ky, ox * spec.stride + kx);
              if (x.data[idx] > x.data[best]) best = idx;
            }
          }
          y.data[out] = x.data[best];
          argmax[out] = best;
        }
      }
    }
  }
  if (cache) cache->index = std::move(argmax);
  return y;
}

Tensor4 max_pool_backward(const LayerCache& cache, const Tensor4& dy) {
  if (cache.index.size() != dy.size()) throw StateError("max-pool cache does not match gradient");
  Tensor4 dx(dy.n, cache.in_shape.c, cache.in_shape.h, cache.in_shape.w);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[cache.index[i]] += dy.data[i];
  return dx;
}

Tensor4 avg_pool_forward(const LayerSpec& spec, const Tensor4& x) {
  const int ho = pool_out(x.h, spec.window, spec.stride);
  const int wo = pool_out(x.w, spec.window, spec.stride);
  const double inv_area = 1.0 / (static_cast<double>(spec.window) * spec.window);
  Tensor4 y(x.n, x.c, ho, wo);
  std::size_t out = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++out) {
          double acc = 0.0;
          for (int ky = 0; ky < spec.window; ++ky) {
            for (int kx = 0; kx < spec.window; ++kx) {
              acc += x.at(n, c, oy * spec.stride + ky, ox * spec.stride + kx);
            }
          }
          y.data[out] = acc * inv_area;
        }
      }
    }
  }
  return y;
}

Tensor4 avg_pool_backward(const LayerSpec& spec, const LayerCache& cache, const Tensor4& dy) {
  Tensor4 dx(dy.n, cache.in_shape.c, cache.in_shape.h, cache.in_shape.w);
  const double inv_area = 1.0 / (static_cast<double>(spec.window) * spec.window);
  std::size_t out = 0;
  for (int n = 0; n < dy.n; ++n) {
    for (int c = 0; c < dy.c; ++c) {
      for (int oy = 0; oy < dy.h; ++oy) {
        for (int ox = 0; ox < dy.w; ++ox, ++out) {
          const double g = dy.data[out] * inv_area;
          for (int ky = 0; ky < spec.window; ++ky) {
            for (int kx = 0; kx < spec.window; ++kx) {
              dx.at(n, c, oy * spec.stride + ky, ox * spec.stride + kx) += g;
            }
          }
        }
      }
    }
  }
  return dx;
}

Tensor4 dense_forward(const LayerSpec& spec, const Layer& layer, const Tensor4& x,
                      LayerCache* cache) {
  const auto& weight = param_of(layer, ParamRole::Weight);
  Tensor4 y(x.n, spec.out_dim, 1, 1);
  if (spec.has_bias) {
    const auto& bias = param_of(layer, ParamRole::Bias);
    for (int n = 0; n < x.n; ++n) {
      std::copy(bias.begin(), bias.end(), y.data.begin() + static_cast<std::ptrdiff_t>(n) * spec.out_dim);
    }
  }
  kernels::gemm(Trans::No, Trans::Yes, x.n, spec.out_dim, spec.in_dim, x.data.data(), spec.in_dim,
                weight.data(), spec.in_dim, spec.has_bias ? 1.0 : 0.0, y.data.data(),
                spec.out_dim);
  if (cache) cache->input = x;
  return y;
}

Tensor4 dense_backward(const LayerSpec& spec, const Layer& layer, const LayerCache& cache,
                       const Tensor4& dy, std::vector<std::vector<double>>& grads) {
  const Tensor4& x = cache.input;
  if (x.n != dy.n || x.sample_size() != static_cast<std::size_t>(spec.in_dim)) {
    throw StateError("dense cache does not match gradient");
  }
  auto& dw = grads[0];
  dw.assign(static_cast<std::size_t>(spec.out_dim) * spec.in_dim, 0.0);
  kernels::gemm(Trans::Yes, Trans::No, spec.out_dim, spec.in_dim, dy.n, dy.data.data(),
                spec.out_dim, x.data.data(), spec.in_dim, 0.0, dw.data(), spec.in_dim);
  if (spec.has_bias) {
    auto& db = grads[1];
    db.assign(spec.out_dim, 0.0);
    for (int n = 0; n < dy.n; ++n) {
      kernels::axpy(1.0, dy.data.data() + static_cast<std::size_t>(n) * spec.out_dim, db.data(),
                    spec.out_dim);
    }
  }
  const auto& weight = param_of(layer, ParamRole::Weight);
  Tensor4 dx(x.n, x.c, x.h, x.w);
  kernels::gemm(Trans::No, Trans::No, dy.n, spec.in_dim, spec.out_dim, dy.data.data(),
                spec.out_dim, weight.data(), spec.in_dim, 0.0, dx.data.data(), spec.in_dim);
  return dx;
}

}  // namespace slim::detail
