#include "vatlas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vatlas {

Tensor::Tensor(int r, int c, std::vector<double> values) : rows(r), cols(c), d(std::move(values)) {
  if (d.size() != std::size_t(r) * std::size_t(c))
    throw std::invalid_argument("Tensor: value count does not match shape");
}

Tensor Tensor::full(int r, int c, double v) {
  Tensor t(r, c);
  t.fill(v);
  return t;
}

void Tensor::fill(double v) { std::fill(d.begin(), d.end(), v); }

bool Tensor::all_finite() const {
  for (double x : d)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace vatlas
