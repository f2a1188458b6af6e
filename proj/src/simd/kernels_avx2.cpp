// Compiled with -mavx2 -mfma. Nothing here may run before dispatch.cpp has
// confirmed both features via cpuid.

#include "mensp/simd/kernels.hpp"

#if defined(MENSP_HAVE_AVX2_TU)

#include <immintrin.h>

namespace mensp::simd::avx2 {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

inline void store_row(float* c, std::size_t j, float value, bool accumulate) {
  c[j] = accumulate ? c[j] + value : value;
}

// C[i, j0:j0+w] (+)= sum_p A(i,p) * B[p, j0:j0+w] for 4 rows at once, where
// A(i,p) is read through (row_stride, col_stride) so the same body serves the
// nn and tn layouts.
template <int Rows>
void axpy_block(std::size_t n, std::size_t k, const float* a, std::size_t a_row_stride,
                std::size_t a_col_stride, const float* b, std::size_t ldb, float* c,
                std::size_t ldc, bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256 acc0[Rows], acc1[Rows];
    for (int r = 0; r < Rows; ++r) {
      acc0[r] = _mm256_setzero_ps();
      acc1[r] = _mm256_setzero_ps();
    }
    for (std::size_t p = 0; p < k; ++p) {
      const float* brow = b + p * ldb + j;
      __m256 b0 = _mm256_loadu_ps(brow);
      __m256 b1 = _mm256_loadu_ps(brow + 8);
      for (int r = 0; r < Rows; ++r) {
        __m256 av = _mm256_broadcast_ss(a + r * a_row_stride + p * a_col_stride);
        acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
      }
    }
    for (int r = 0; r < Rows; ++r) {
      float* crow = c + r * ldc + j;
      if (accumulate) {
        acc0[r] = _mm256_add_ps(acc0[r], _mm256_loadu_ps(crow));
        acc1[r] = _mm256_add_ps(acc1[r], _mm256_loadu_ps(crow + 8));
      }
      _mm256_storeu_ps(crow, acc0[r]);
      _mm256_storeu_ps(crow + 8, acc1[r]);
    }
  }
  for (; j + 8 <= n; j += 8) {
    __m256 acc[Rows];
    for (int r = 0; r < Rows; ++r) acc[r] = _mm256_setzero_ps();
    for (std::size_t p = 0; p < k; ++p) {
      __m256 b0 = _mm256_loadu_ps(b + p * ldb + j);
      for (int r = 0; r < Rows; ++r) {
        __m256 av = _mm256_broadcast_ss(a + r * a_row_stride + p * a_col_stride);
        acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
      }
    }
    for (int r = 0; r < Rows; ++r) {
      float* crow = c + r * ldc + j;
      if (accumulate) acc[r] = _mm256_add_ps(acc[r], _mm256_loadu_ps(crow));
      _mm256_storeu_ps(crow, acc[r]);
    }
  }
  for (; j < n; ++j) {
    for (int r = 0; r < Rows; ++r) {
      float sum = 0.0f;
      for (std::size_t p = 0; p < k; ++p) sum += a[r * a_row_stride + p * a_col_stride] * b[p * ldb + j];
      store_row(c + r * ldc, j, sum, accumulate);
    }
  }
}

void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  std::size_t a_row_stride, std::size_t a_col_stride, const float* b,
                  std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4)
    axpy_block<4>(n, k, a + i * a_row_stride, a_row_stride, a_col_stride, b, ldb, c + i * ldc, ldc,
                  accumulate);
  for (; i < m; ++i)
    axpy_block<1>(n, k, a + i * a_row_stride, a_row_stride, a_col_stride, b, ldb, c + i * ldc, ldc,
                  accumulate);
}

}  // namespace

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 s0 = _mm256_setzero_ps();
  __m256 s1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), s0);
    s1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), s1);
  }
  for (; i + 8 <= n; i += 8) s0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), s0);
  float sum = hsum(_mm256_add_ps(s0, s1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double sum = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  // Dot-product form: 2 rows of A against 4 rows of B keeps 8 accumulators live.
  const std::size_t kv = k / 8 * 8;
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const float* a0 = a + i * lda;
    const float* a1 = a0 + lda;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* b0 = b + j * ldb;
      const float* b1 = b0 + ldb;
      const float* b2 = b1 + ldb;
      const float* b3 = b2 + ldb;
      __m256 s00 = _mm256_setzero_ps(), s01 = _mm256_setzero_ps(), s02 = _mm256_setzero_ps(),
             s03 = _mm256_setzero_ps(), s10 = _mm256_setzero_ps(), s11 = _mm256_setzero_ps(),
             s12 = _mm256_setzero_ps(), s13 = _mm256_setzero_ps();
      for (std::size_t p = 0; p < kv; p += 8) {
        __m256 x0 = _mm256_loadu_ps(a0 + p);
        __m256 x1 = _mm256_loadu_ps(a1 + p);
        __m256 y = _mm256_loadu_ps(b0 + p);
        s00 = _mm256_fmadd_ps(x0, y, s00);
        s10 = _mm256_fmadd_ps(x1, y, s10);
        y = _mm256_loadu_ps(b1 + p);
        s01 = _mm256_fmadd_ps(x0, y, s01);
        s11 = _mm256_fmadd_ps(x1, y, s11);
        y = _mm256_loadu_ps(b2 + p);
        s02 = _mm256_fmadd_ps(x0, y, s02);
        s12 = _mm256_fmadd_ps(x1, y, s12);
        y = _mm256_loadu_ps(b3 + p);
        s03 = _mm256_fmadd_ps(x0, y, s03);
        s13 = _mm256_fmadd_ps(x1, y, s13);
      }
      float r[2][4] = {{hsum(s00), hsum(s01), hsum(s02), hsum(s03)},
                       {hsum(s10), hsum(s11), hsum(s12), hsum(s13)}};
      for (std::size_t p = kv; p < k; ++p) {
        r[0][0] += a0[p] * b0[p];
        r[0][1] += a0[p] * b1[p];
        r[0][2] += a0[p] * b2[p];
        r[0][3] += a0[p] * b3[p];
        r[1][0] += a1[p] * b0[p];
        r[1][1] += a1[p] * b1[p];
        r[1][2] += a1[p] * b2[p];
        r[1][3] += a1[p] * b3[p];
      }
      for (int q = 0; q < 4; ++q) {
        store_row(c + i * ldc, j + q, r[0][q], accumulate);
        store_row(c + (i + 1) * ldc, j + q, r[1][q], accumulate);
      }
    }
    for (; j < n; ++j) {
      store_row(c + i * ldc, j, dot_f32(a0, b + j * ldb, k), accumulate);
      store_row(c + (i + 1) * ldc, j, dot_f32(a1, b + j * ldb, k), accumulate);
    }
  }
  for (; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      store_row(c + i * ldc, j, dot_f32(a + i * lda, b + j * ldb, k), accumulate);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  gemm_strided(m, n, k, a, lda, 1, b, ldb, c, ldc, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  gemm_strided(m, n, k, a, 1, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace mensp::simd::avx2

#endif
