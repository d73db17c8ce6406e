// AVX2 + FMA variants. This file is compiled with -mavx2 -mfma and must only be
// entered after the runtime check in dispatch.cpp.

#include <immintrin.h>

#include "slimkit/kernels.hpp"

namespace slim::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline void store_out(double* c, double beta, __m256d acc) {
  if (beta == 0.0) {
    _mm256_storeu_pd(c, acc);
  } else {
    _mm256_storeu_pd(c, _mm256_fmadd_pd(_mm256_set1_pd(beta), _mm256_loadu_pd(c), acc));
  }
}

inline void store_out(double* c, double beta, double acc) {
  *c = beta == 0.0 ? acc : beta * *c + acc;
}

template <bool ATrans>
inline double a_at(const double* a, std::size_t lda, std::size_t i, std::size_t p) {
  return ATrans ? a[p * lda + i] : a[i * lda + p];
}

// Row block of R rows against an 8-column panel of a row-contiguous B.
template <int R, bool ATrans>
void tile_8(std::size_t i0, std::size_t j0, std::size_t k, const double* a, std::size_t lda,
            const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  __m256d acc0[R];
  __m256d acc1[R];
  for (int r = 0; r < R; ++r) {
    acc0[r] = _mm256_setzero_pd();
    acc1[r] = _mm256_setzero_pd();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb + j0;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    for (int r = 0; r < R; ++r) {
      const __m256d av = _mm256_set1_pd(a_at<ATrans>(a, lda, i0 + r, p));
      acc0[r] = _mm256_fmadd_pd(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_pd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    double* crow = c + (i0 + r) * ldc + j0;
    store_out(crow, beta, acc0[r]);
    store_out(crow + 4, beta, acc1[r]);
  }
}

template <int R, bool ATrans>
void tile_4(std::size_t i0, std::size_t j0, std::size_t k, const double* a, std::size_t lda,
            const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  __m256d acc[R];
  for (int r = 0; r < R; ++r) acc[r] = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d bv = _mm256_loadu_pd(b + p * ldb + j0);
    for (int r = 0; r < R; ++r) {
      acc[r] = _mm256_fmadd_pd(_mm256_set1_pd(a_at<ATrans>(a, lda, i0 + r, p)), bv, acc[r]);
    }
  }
  for (int r = 0; r < R; ++r) store_out(c + (i0 + r) * ldc + j0, beta, acc[r]);
}

template <int R, bool ATrans>
void row_block(std::size_t i0, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) tile_8<R, ATrans>(i0, j, k, a, lda, b, ldb, beta, c, ldc);
  for (; j + 4 <= n; j += 4) tile_4<R, ATrans>(i0, j, k, a, lda, b, ldb, beta, c, ldc);
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_at<ATrans>(a, lda, i0 + r, p) * b[p * ldb + j];
      store_out(c + (i0 + r) * ldc + j, beta, acc);
    }
  }
}

template <bool ATrans>
void gemm_b_rows(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_block<4, ATrans>(i, n, k, a, lda, b, ldb, beta, c, ldc);
  switch (m - i) {
    case 3: row_block<3, ATrans>(i, n, k, a, lda, b, ldb, beta, c, ldc); break;
    case 2: row_block<2, ATrans>(i, n, k, a, lda, b, ldb, beta, c, ldc); break;
    case 1: row_block<1, ATrans>(i, n, k, a, lda, b, ldb, beta, c, ldc); break;
    default: break;
  }
}

double dot_avx2(const double* x, const double* y, std::size_t n);

// A rows and B rows are both contiguous along k: blocked dot products.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d av = _mm256_loadu_pd(arow + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += arow[p] * b0[p];
        r1 += arow[p] * b1[p];
        r2 += arow[p] * b2[p];
        r3 += arow[p] * b3[p];
      }
      double* crow = c + i * ldc + j;
      store_out(crow, beta, r0);
      store_out(crow + 1, beta, r1);
      store_out(crow + 2, beta, r2);
      store_out(crow + 3, beta, r3);
    }
    for (; j < n; ++j) store_out(c + i * ldc + j, beta, dot_avx2(arow, b + j * ldb, k));
  }
}

void gemm_tt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * lda + i] * b[j * ldb + p];
      store_out(c + i * ldc + j, beta, acc);
    }
  }
}

void gemm_avx2(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
               std::size_t ldc) {
  if (tb == Trans::No) {
    if (ta == Trans::No) {
      gemm_b_rows<false>(m, n, k, a, lda, b, ldb, beta, c, ldc);
    } else {
      gemm_b_rows<true>(m, n, k, a, lda, b, ldb, beta, c, ldc);
    }
  } else if (ta == Trans::No) {
    gemm_nt(m, n, k, a, lda, b, ldb, beta, c, ldc);
  } else {
    gemm_tt(m, n, k, a, lda, b, ldb, beta, c, ldc);
  }
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
    s1 = _mm256_add_pd(s1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double sum_sq_dev_avx2(const double* x, double mean, std::size_t n) {
  const __m256d mv = _mm256_set1_pd(mean);
  __m256d s0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), mv);
    s0 = _mm256_fmadd_pd(d, d, s0);
  }
  double acc = hsum(s0);
  for (; i < n; ++i) {
    const double d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void affine_avx2(const double* x, double scale, double shift, double* y, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(scale);
  const __m256d tv = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + i), tv));
  }
  for (; i < n; ++i) y[i] = scale * x[i] + shift;
}

void normalize_avx2(const double* x, double mean, double scale, double* y, std::size_t n) {
  const __m256d mv = _mm256_set1_pd(mean);
  const __m256d sv = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), mv), sv));
  }
  for (; i < n; ++i) y[i] = (x[i] - mean) * scale;
}

void lincomb_avx2(double a, const double* u, double b, const double* v, double c, double* y,
                  std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  const __m256d bv = _mm256_set1_pd(b);
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_fmadd_pd(bv, _mm256_loadu_pd(v + i), cv);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(u + i), t));
  }
  for (; i < n; ++i) y[i] = a * u[i] + b * v[i] + c;
}

void nesterov_avx2(double* theta, const double* grad, double* velocity, double lr, double mu,
                   double wd, std::size_t n) {
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d muv = _mm256_set1_pd(mu);
  const __m256d wdv = _mm256_set1_pd(wd);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d th = _mm256_loadu_pd(theta + i);
    const __m256d g = _mm256_fmadd_pd(wdv, th, _mm256_loadu_pd(grad + i));
    const __m256d v = _mm256_fmadd_pd(muv, _mm256_loadu_pd(velocity + i), g);
    _mm256_storeu_pd(velocity + i, v);
    const __m256d step = _mm256_fmadd_pd(muv, v, g);
    _mm256_storeu_pd(theta + i, _mm256_fnmadd_pd(lrv, step, th));
  }
  for (; i < n; ++i) {
    const double g = grad[i] + wd * theta[i];
    velocity[i] = mu * velocity[i] + g;
    theta[i] -= lr * (g + mu * velocity[i]);
  }
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{
      Isa::Avx2,       "avx2",     gemm_avx2,     dot_avx2,     sum_avx2,
      sum_sq_dev_avx2, axpy_avx2, affine_avx2, normalize_avx2, lincomb_avx2,
      nesterov_avx2,
  };
  return table;
}

}  // namespace slim::kernels
