#include "vatlas/kernels.hpp"

#include <cmath>
#include <cstring>

// Scalar reference backend. This file defines the canonical arithmetic for
// every kernel; other backends are required to reproduce it bit for bit.

namespace vatlas::kern::scalar {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * std::size_t(m) * n);
  for (int i = 0; i < m; ++i) {
    double* ci = c + std::size_t(i) * n;
    const double* ai = a + std::size_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const double ap = ai[p];
      const double* bp = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += ap * bp[j];
    }
  }
}

void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < m; ++p) {
    const double* ap = a + std::size_t(p) * k;
    const double* bp = b + std::size_t(p) * n;
    for (int i = 0; i < k; ++i) {
      const double av = ap[i];
      double* ci = c + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
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
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void scale(const double* x, double s, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = s * x[i];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(const double* x, double s, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + s;
}

void acc_scalar(double g, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += g;
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_acc(const double* x, const double* g, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) y[i] += g[i];
  }
}

void tanh_backward_acc(const double* t, const double* g, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += g[i] * (1.0 - t[i] * t[i]);
}

double sum(const double* x, std::size_t n) {
  // Canonical 4-lane striped reduction; see kernels.hpp.
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc0 += x[i];
    acc1 += x[i + 1];
    acc2 += x[i + 2];
    acc3 += x[i + 3];
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (std::size_t i = n4; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (std::size_t i = n4; i < n; ++i) s += a[i] * b[i];
  return s;
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
  const double c1 = 1.0 - beta1;
  const double c2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + c1 * gi;
    v[i] = beta2 * v[i] + c2 * (gi * gi);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
  }
}

}  // namespace vatlas::kern::scalar
