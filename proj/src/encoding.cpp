#include "vatlas/encoding.hpp"

#include <cmath>

namespace vatlas {

void positional_encode_rows(const double* in, double* out, int rows, int dims, int freqs) {
  const int width = encoded_width(dims, freqs);
  for (int r = 0; r < rows; ++r) {
    const double* x = in + std::size_t(r) * dims;
    double* o = out + std::size_t(r) * width;
    for (int d = 0; d < dims; ++d) o[d] = x[d];
    double w = kPi;
    for (int j = 0; j < freqs; ++j, w *= 2.0) {
      double* s = o + dims + 2 * j * dims;
      double* c = s + dims;
      for (int d = 0; d < dims; ++d) {
        s[d] = std::sin(w * x[d]);
        c[d] = std::cos(w * x[d]);
      }
    }
  }
}

Tensor positional_encode(const Tensor& xs, int freqs) {
  Tensor out(xs.rows, encoded_width(xs.cols, freqs));
  positional_encode_rows(xs.data(), out.data(), xs.rows, xs.cols, freqs);
  return out;
}

}  // namespace vatlas
