#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the autodiff tape and the optimizer.
//
// Every kernel has a scalar reference implementation that defines the exact
// arithmetic, and optionally a wider backend (AVX2 on x86-64) selected at
// runtime. Backends must agree with the scalar reference bit for bit, so a
// few rules apply to every implementation:
//
//  * no fused multiply-add, ever (the build also passes -ffp-contract=off);
//  * matrix products accumulate in i,p,j order, one rank-1 update at a time,
//    so the per-element addition order is independent of vector width;
//  * reductions (sum, dot) use a fixed 4-lane striped order: lane l sums
//    elements 4*j+l, the four partials combine as (l0+l1)+(l2+l3), and the
//    n%4 tail is then added left to right.
//
// Anything that cannot keep these guarantees (e.g. tanh) stays scalar-only.

namespace vatlas::kern {

enum class Backend { Scalar, Avx2 };

// Backend with the widest vectors supported by this CPU (picked once at startup).
Backend active_backend();
bool backend_available(Backend b);
// Override the active backend, e.g. to force the scalar reference in tests.
// Throws std::runtime_error if the backend is not available on this CPU.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

// c(m x n) = a(m x k) * b(k x n); all row-major, c is overwritten.
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// c(k x n) += a(m x k)^T * b(m x n)
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);
// c(m x k) += a(m x n) * b(k x n)^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k);

void add(const double* a, const double* b, double* y, std::size_t n);       // y = a + b
void sub(const double* a, const double* b, double* y, std::size_t n);       // y = a - b
void mul(const double* a, const double* b, double* y, std::size_t n);       // y = a .* b
void mul_acc(const double* a, const double* b, double* y, std::size_t n);   // y += a .* b
void scale(const double* x, double s, double* y, std::size_t n);            // y = s * x
void axpy(double a, const double* x, double* y, std::size_t n);             // y += a * x
void add_scalar(const double* x, double s, double* y, std::size_t n);       // y = x + s
void acc_scalar(double g, double* y, std::size_t n);                        // y += g

void relu(const double* x, double* y, std::size_t n);                       // y = max(x, 0)
// y += (x > 0) ? g : 0.  The derivative at exactly x == 0 is defined as 0.
void relu_mask_acc(const double* x, const double* g, double* y, std::size_t n);
// y += g .* (1 - t.*t) where t = tanh(x) has already been computed.
void tanh_backward_acc(const double* t, const double* g, double* y, std::size_t n);

double sum(const double* x, std::size_t n);                  // fixed-order reduction
double dot(const double* a, const double* b, std::size_t n); // fixed-order reduction

// One Adam step on a flat parameter array. bias1 = 1 - beta1^t, bias2 = 1 - beta2^t.
//   m = beta1*m + (1-beta1)*g
//   v = beta2*v + (1-beta2)*g*g
//   p -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);

namespace scalar {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k);
void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void mul_acc(const double* a, const double* b, double* y, std::size_t n);
void scale(const double* x, double s, double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void add_scalar(const double* x, double s, double* y, std::size_t n);
void acc_scalar(double g, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_mask_acc(const double* x, const double* g, double* y, std::size_t n);
void tanh_backward_acc(const double* t, const double* g, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);
}  // namespace scalar

#if defined(VATLAS_BUILD_AVX2)
namespace avx2 {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k);
void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void mul_acc(const double* a, const double* b, double* y, std::size_t n);
void scale(const double* x, double s, double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void add_scalar(const double* x, double s, double* y, std::size_t n);
void acc_scalar(double g, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_mask_acc(const double* x, const double* g, double* y, std::size_t n);
void tanh_backward_acc(const double* t, const double* g, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);
}  // namespace avx2
#endif

}  // namespace vatlas::kern
