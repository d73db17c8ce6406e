#include <atomic>
#include <cstdlib>
#include <string_view>

#include "slimkit/errors.hpp"
#include "slimkit/kernels.hpp"

namespace slim::kernels {

#if defined(SLIMKIT_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SLIMKIT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* resolve_default() {
  const char* env = std::getenv("SLIMKIT_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{resolve_default()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(SLIMKIT_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

bool available(Isa isa) { return isa == Isa::Scalar || avx2_table() != nullptr; }

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (isa == Isa::Scalar) {
    current().store(&scalar_table());
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw InvalidInput("AVX2 kernels are not available on this machine");
  current().store(t);
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  active().gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}
double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
double sum(const double* x, std::size_t n) { return active().sum(x, n); }
double sum_sq_dev(const double* x, double mean, std::size_t n) {
  return active().sum_sq_dev(x, mean, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
void affine(const double* x, double scale, double shift, double* y, std::size_t n) {
  active().affine(x, scale, shift, y, n);
}
void normalize(const double* x, double mean, double scale, double* y, std::size_t n) {
  active().normalize(x, mean, scale, y, n);
}
void lincomb(double a, const double* u, double b, const double* v, double c, double* y,
             std::size_t n) {
  active().lincomb(a, u, b, v, c, y, n);
}
void nesterov(double* theta, const double* grad, double* velocity, double lr, double mu,
              double wd, std::size_t n) {
  active().nesterov(theta, grad, velocity, lr, mu, wd, n);
}

}  // namespace slim::kernels
