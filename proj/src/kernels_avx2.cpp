#include "latentprobe/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace lp::kern {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double out = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

double score_sum_avx2(const double* s, const double* r, const double* t,
                      std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d sr = _mm256_add_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(r + i));
    acc = _mm256_fmadd_pd(sr, _mm256_loadu_pd(t + i), acc);
  }
  double out = hsum(acc);
  for (; i < n; ++i) out += (s[i] + r[i]) * t[i];
  return out;
}

// mul+add (no fma) so results are bitwise equal to the scalar reference.
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adagrad_step_avx2(double* w, double* acc, const double* g, double lr,
                       std::size_t n) {
  __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vg = _mm256_loadu_pd(g + i);
    __m256d va = _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(vg, vg));
    _mm256_storeu_pd(acc + i, va);
    __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, vg), _mm256_sqrt_pd(va));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  scalar_kernels().adagrad_step(w + i, acc + i, g + i, lr, n - i);
}

void moments_avx2(const double* x, const double* y, std::size_t n,
                  double* sums) {
  __m256d sx = _mm256_setzero_pd(), sy = _mm256_setzero_pd();
  __m256d sxx = _mm256_setzero_pd(), syy = _mm256_setzero_pd();
  __m256d sxy = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    sx = _mm256_add_pd(sx, vx);
    sy = _mm256_add_pd(sy, vy);
    sxx = _mm256_fmadd_pd(vx, vx, sxx);
    syy = _mm256_fmadd_pd(vy, vy, syy);
    sxy = _mm256_fmadd_pd(vx, vy, sxy);
  }
  sums[0] = hsum(sx);
  sums[1] = hsum(sy);
  sums[2] = hsum(sxx);
  sums[3] = hsum(syy);
  sums[4] = hsum(sxy);
  for (; i < n; ++i) {
    sums[0] += x[i];
    sums[1] += y[i];
    sums[2] += x[i] * x[i];
    sums[3] += y[i] * y[i];
    sums[4] += x[i] * y[i];
  }
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k{dot_avx2, score_sum_avx2, axpy_avx2, adagrad_step_avx2,
                         moments_avx2};
  return k;
}

}  // namespace lp::kern

#endif  // x86-64
