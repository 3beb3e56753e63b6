#include "mfqp/kernels.hpp"

#include <immintrin.h>

#include <cmath>

// Compiled with -mavx2 -mfma; only reached after the CPUID check in kernels.cpp.
namespace mfqp::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double abs_diff_sum(const double* a, const double* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

void drift_resets(const double* mu, const double* fwd, const double* rst, double* out, std::size_t n) {
  if (n == 0) return;
  __m256d inflow = _mm256_setzero_pd();
  std::size_t z = 1;
  for (; z + 4 <= n; z += 4) {
    __m256d m = _mm256_loadu_pd(mu + z);
    __m256d r = _mm256_loadu_pd(rst + z);
    __m256d f = _mm256_loadu_pd(fwd + z);
    __m256d prev = _mm256_mul_pd(_mm256_loadu_pd(fwd + z - 1), _mm256_loadu_pd(mu + z - 1));
    __m256d o = _mm256_fnmadd_pd(_mm256_add_pd(f, r), m, prev);
    _mm256_storeu_pd(out + z, o);
    inflow = _mm256_fmadd_pd(r, m, inflow);
  }
  double in0 = hsum(inflow);
  for (; z < n; ++z) {
    out[z] = fwd[z - 1] * mu[z - 1] - (fwd[z] + rst[z]) * mu[z];
    in0 += rst[z] * mu[z];
  }
  out[0] = in0 - fwd[0] * mu[0];
}

void drift_birth_death(const double* mu, const double* fwd, const double* bwd, double* out,
                       std::size_t n) {
  if (n == 0) return;
  if (n < 6) {
    scalar::drift_birth_death(mu, fwd, bwd, out, n);
    return;
  }
  out[0] = bwd[1] * mu[1] - (fwd[0] + bwd[0]) * mu[0];
  std::size_t z = 1;
  for (; z + 4 < n; z += 4) {
    __m256d m = _mm256_loadu_pd(mu + z);
    __m256d lo = _mm256_mul_pd(_mm256_loadu_pd(fwd + z - 1), _mm256_loadu_pd(mu + z - 1));
    __m256d in = _mm256_fmadd_pd(_mm256_loadu_pd(bwd + z + 1), _mm256_loadu_pd(mu + z + 1), lo);
    __m256d leave = _mm256_add_pd(_mm256_loadu_pd(fwd + z), _mm256_loadu_pd(bwd + z));
    _mm256_storeu_pd(out + z, _mm256_fnmadd_pd(leave, m, in));
  }
  for (; z < n; ++z) {
    double in = fwd[z - 1] * mu[z - 1];
    if (z + 1 < n) in += bwd[z + 1] * mu[z + 1];
    out[z] = in - (fwd[z] + bwd[z]) * mu[z];
  }
}

}  // namespace mfqp::kernels::avx2
