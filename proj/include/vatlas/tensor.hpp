#pragma once

#include <cstddef>
#include <vector>

// Dense row-major 2-D array of doubles. All network parameters, batches and
// flattened images flow through this one type; shape checking happens in the
// ops that consume it.

namespace vatlas {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), d(std::size_t(r) * std::size_t(c), 0.0) {}
  Tensor(int r, int c, std::vector<double> values);

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double v);

  double& at(int r, int c) { return d[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return d[std::size_t(r) * cols + c]; }
  double* row(int r) { return d.data() + std::size_t(r) * cols; }
  const double* row(int r) const { return d.data() + std::size_t(r) * cols; }

  double* data() { return d.data(); }
  const double* data() const { return d.data(); }
  std::size_t size() const { return d.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v);
  bool all_finite() const;
};

}  // namespace vatlas
