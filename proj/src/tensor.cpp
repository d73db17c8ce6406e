#include "slimkit/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "slimkit/errors.hpp"

namespace slim {

Tensor4::Tensor4(int n_, int c_, int h_, int w_, double fill) : n(n_), c(c_), h(h_), w(w_) {
  if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0) throw ShapeError("negative tensor dimension");
  data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill);
}

bool Tensor4::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace slim
