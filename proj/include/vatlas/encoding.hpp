#pragma once

#include "vatlas/tensor.hpp"

// Sinusoidal positional encoding for coordinate-MLP inputs. A row of d
// values becomes d * (1 + 2*freqs) values laid out as
//   [x_0..x_{d-1},
//    sin(2^0 pi x)..., cos(2^0 pi x)...,
//    sin(2^1 pi x)..., cos(2^1 pi x)..., ...]
// The same routine backs both the plain (non-differentiated) encoding and
// the tape op, so the two can never drift apart.

namespace vatlas {

constexpr double kPi = 3.141592653589793238462643383279502884;

inline int encoded_width(int dims, int freqs) { return dims * (1 + 2 * freqs); }

void positional_encode_rows(const double* in, double* out, int rows, int dims, int freqs);

Tensor positional_encode(const Tensor& xs, int freqs);

}  // namespace vatlas
