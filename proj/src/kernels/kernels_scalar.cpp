#include "slimkit/kernels.hpp"

namespace slim::kernels {
namespace {

void gemm_scalar(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                 std::size_t ldc) {
  const bool at = ta == Trans::Yes;
  const bool bt = tb == Trans::Yes;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = at ? a[p * lda + i] : a[i * lda + p];
        const double bv = bt ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      double& out = c[i * ldc + j];
      out = beta == 0.0 ? acc : beta * out + acc;
    }
  }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum_sq_dev_scalar(const double* x, double mean, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine_scalar(const double* x, double scale, double shift, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = scale * x[i] + shift;
}

void normalize_scalar(const double* x, double mean, double scale, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) * scale;
}

void lincomb_scalar(double a, const double* u, double b, const double* v, double c, double* y,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * u[i] + b * v[i] + c;
}

void nesterov_scalar(double* theta, const double* grad, double* velocity, double lr, double mu,
                     double wd, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i] + wd * theta[i];
    velocity[i] = mu * velocity[i] + g;
    theta[i] -= lr * (g + mu * velocity[i]);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      Isa::Scalar,    "scalar",      gemm_scalar,    dot_scalar,     sum_scalar,
      sum_sq_dev_scalar, axpy_scalar, affine_scalar, normalize_scalar, lincomb_scalar,
      nesterov_scalar,
  };
  return table;
}

}  // namespace slim::kernels
