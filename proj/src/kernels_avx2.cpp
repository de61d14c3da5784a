#include "vatlas/kernels.hpp"

#if defined(VATLAS_BUILD_AVX2)

#include <immintrin.h>

#include <cstring>

// AVX2 backend. Compiled with -mavx2 for this translation unit only; callers
// reach it through the runtime dispatch in kernels.cpp. Every loop mirrors
// the scalar reference's accumulation order and uses mul+add (never FMA) so
// results are bit-identical. See kernels.hpp for the reduction-order rules.

namespace vatlas::kern::avx2 {

namespace {

// Lanes of a 4-wide accumulator combined exactly like the scalar reference:
// (l0 + l1) + (l2 + l3).
inline double combine_lanes(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

// y[0..n) += s * x[0..n) without FMA.
inline void axpy_row(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * std::size_t(m) * n);
  for (int i = 0; i < m; ++i) {
    double* ci = c + std::size_t(i) * n;
    const double* ai = a + std::size_t(i) * k;
    for (int p = 0; p < k; ++p) axpy_row(ai[p], b + std::size_t(p) * n, ci, std::size_t(n));
  }
}

void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < m; ++p) {
    const double* ap = a + std::size_t(p) * k;
    const double* bp = b + std::size_t(p) * n;
    for (int i = 0; i < k; ++i) axpy_row(ap[i], bp, c + std::size_t(i) * n, std::size_t(n));
  }
}

void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + std::size_t(i) * n;
    double* ci = c + std::size_t(i) * k;
    for (int p = 0; p < k; ++p) ci[p] += dot(ai, b + std::size_t(p) * n, std::size_t(n));
  }
}

void add(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

void scale(const double* x, double s, double* y, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(sv, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = s * x[i];
}

void axpy(double a, const double* x, double* y, std::size_t n) { axpy_row(a, x, y, n); }

void add_scalar(const double* x, double s, double* y, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(x + i), sv));
  for (; i < n; ++i) y[i] = x[i] + s;
}

void acc_scalar(double g, double* y, std::size_t n) {
  const __m256d gv = _mm256_set1_pd(g);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), gv));
  for (; i < n; ++i) y[i] += g;
}

void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_acc(const double* x, const double* g, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d sum = _mm256_add_pd(yv, _mm256_loadu_pd(g + i));
    // blendv keeps y's original bits where the mask is false, matching the
    // scalar reference which skips the += entirely.
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(yv, sum, mask));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) y[i] += g[i];
  }
}

void tanh_backward_acc(const double* t, const double* g, double* y, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d tv = _mm256_loadu_pd(t + i);
    const __m256d d = _mm256_sub_pd(one, _mm256_mul_pd(tv, tv));
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(g + i), d);
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += g[i] * (1.0 - t[i] * t[i]);
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = combine_lanes(acc);
  for (std::size_t i = n4; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double s = combine_lanes(acc);
  for (std::size_t i = n4; i < n; ++i) s += a[i] * b[i];
  return s;
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d c1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d c2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d rb1 = _mm256_set1_pd(bias1);
  const __m256d rb2 = _mm256_set1_pd(bias2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_add_pd(_mm256_mul_pd(b1, mi), _mm256_mul_pd(c1, gi));
    vi = _mm256_add_pd(_mm256_mul_pd(b2, vi), _mm256_mul_pd(c2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, rb1);
    const __m256d vhat = _mm256_div_pd(vi, rb2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d step = _mm256_mul_pd(lrv, _mm256_div_pd(mhat, denom));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  if (i < n)
    scalar::adam_update(p + i, g + i, m + i, v + i, n - i, lr, beta1, beta2, eps, bias1, bias2);
}

}  // namespace vatlas::kern::avx2

#endif  // VATLAS_BUILD_AVX2
