#include "vatlas/kernels.hpp"

#include <stdexcept>

// Runtime backend selection. The widest available backend is picked once at
// startup; tests override it with set_backend to compare implementations.

namespace vatlas::kern {

namespace {

bool cpu_has_avx2() {
#if defined(VATLAS_BUILD_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect_backend() { return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar; }

Backend g_backend = detect_backend();

}  // namespace

Backend active_backend() { return g_backend; }

bool backend_available(Backend b) {
  switch (b) {
    case Backend::Scalar: return true;
    case Backend::Avx2: return cpu_has_avx2();
  }
  return false;
}

void set_backend(Backend b) {
  if (!backend_available(b))
    throw std::runtime_error("kernel backend not available on this CPU: " +
                             std::string(backend_name(b)));
  g_backend = b;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

#if defined(VATLAS_BUILD_AVX2)
#define VATLAS_DISPATCH(fn, ...) \
  if (g_backend == Backend::Avx2) return avx2::fn(__VA_ARGS__); \
  return scalar::fn(__VA_ARGS__)
#else
#define VATLAS_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  VATLAS_DISPATCH(matmul, a, b, c, m, k, n);
}
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  VATLAS_DISPATCH(matmul_at_b_acc, a, b, c, m, k, n);
}
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
  VATLAS_DISPATCH(matmul_a_bt_acc, a, b, c, m, n, k);
}
void add(const double* a, const double* b, double* y, std::size_t n) {
  VATLAS_DISPATCH(add, a, b, y, n);
}
void sub(const double* a, const double* b, double* y, std::size_t n) {
  VATLAS_DISPATCH(sub, a, b, y, n);
}
void mul(const double* a, const double* b, double* y, std::size_t n) {
  VATLAS_DISPATCH(mul, a, b, y, n);
}
void mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  VATLAS_DISPATCH(mul_acc, a, b, y, n);
}
void scale(const double* x, double s, double* y, std::size_t n) {
  VATLAS_DISPATCH(scale, x, s, y, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  VATLAS_DISPATCH(axpy, a, x, y, n);
}
void add_scalar(const double* x, double s, double* y, std::size_t n) {
  VATLAS_DISPATCH(add_scalar, x, s, y, n);
}
void acc_scalar(double g, double* y, std::size_t n) { VATLAS_DISPATCH(acc_scalar, g, y, n); }
void relu(const double* x, double* y, std::size_t n) { VATLAS_DISPATCH(relu, x, y, n); }
void relu_mask_acc(const double* x, const double* g, double* y, std::size_t n) {
  VATLAS_DISPATCH(relu_mask_acc, x, g, y, n);
}
void tanh_backward_acc(const double* t, const double* g, double* y, std::size_t n) {
  VATLAS_DISPATCH(tanh_backward_acc, t, g, y, n);
}
double sum(const double* x, std::size_t n) { VATLAS_DISPATCH(sum, x, n); }
double dot(const double* a, const double* b, std::size_t n) { VATLAS_DISPATCH(dot, a, b, n); }
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
  VATLAS_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
}

#undef VATLAS_DISPATCH

}  // namespace vatlas::kern
