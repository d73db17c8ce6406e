#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace slim {

/// Dense (N, C, H, W) activations, row-major.
struct Tensor4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t sample_size() const noexcept {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const noexcept {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t index(int ni, int ci, int hi, int wi) const noexcept {
    return ((static_cast<std::size_t>(ni) * c + ci) * h + hi) * w + wi;
  }
  double& at(int ni, int ci, int hi, int wi) { return data[index(ni, ci, hi, wi)]; }
  double at(int ni, int ci, int hi, int wi) const { return data[index(ni, ci, hi, wi)]; }

  std::span<double> sample(int ni) { return {data.data() + ni * sample_size(), sample_size()}; }
  std::span<const double> sample(int ni) const {
    return {data.data() + ni * sample_size(), sample_size()};
  }

  bool same_shape(const Tensor4& o) const noexcept {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool all_finite() const noexcept;
};

}  // namespace slim
