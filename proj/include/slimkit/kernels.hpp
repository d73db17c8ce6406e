#pragma once

// Dense arithmetic kernels behind the layer engine.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2/FMA variant is compiled into a separate translation unit and selected
// at startup when the CPU supports it. The environment variable
// SLIMKIT_KERNELS=scalar forces the reference path.

#include <cstddef>
#include <string_view>

namespace slim::kernels {

enum class Isa { Scalar, Avx2 };

enum class Trans { No, Yes };

/// C = op(A) * op(B) + beta * C, row-major. op(A) is m x k, op(B) is k x n.
using GemmFn = void (*)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t lda, const double* b, std::size_t ldb,
                        double beta, double* c, std::size_t ldc);

struct KernelTable {
  Isa isa;
  std::string_view name;
  GemmFn gemm;
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  /// Sum of (x[i] - mean)^2.
  double (*sum_sq_dev)(const double* x, double mean, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y = scale * x + shift
  void (*affine)(const double* x, double scale, double shift, double* y, std::size_t n);
  /// y = (x - mean) * scale
  void (*normalize)(const double* x, double mean, double scale, double* y, std::size_t n);
  /// y = a * u + b * v + c
  void (*lincomb)(double a, const double* u, double b, const double* v, double c, double* y,
                  std::size_t n);
  /// Nesterov momentum step without dampening:
  ///   g = grad + wd * theta; v = mu * v + g; theta -= lr * (g + mu * v)
  void (*nesterov)(double* theta, const double* grad, double* velocity, double lr, double mu,
                   double wd, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the variant is not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// Table used by the engine. Resolved once; see select() to override.
const KernelTable& active();
/// Switches the active table. Throws InvalidInput when the ISA is unavailable.
void select(Isa isa);
bool available(Isa isa);

// Forwarders to active(). Kept out of line so that no code compiled for the
// AVX2 translation unit can leak into baseline callers.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_sq_dev(const double* x, double mean, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void affine(const double* x, double scale, double shift, double* y, std::size_t n);
void normalize(const double* x, double mean, double scale, double* y, std::size_t n);
void lincomb(double a, const double* u, double b, const double* v, double c, double* y,
             std::size_t n);
void nesterov(double* theta, const double* grad, double* velocity, double lr, double mu,
              double wd, std::size_t n);

}  // namespace slim::kernels
