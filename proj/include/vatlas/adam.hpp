#pragma once

#include <cstdint>
#include <vector>

#include "vatlas/tensor.hpp"

// Adam with bias correction over a fixed set of parameter tensors.

namespace vatlas {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One line of a training loss trace.
struct LossLogRow {
  int step = 0;
  double loss = 0.0;
};

// Gradient accumulators shaped like a parameter set.
struct GradBuffers {
  std::vector<Tensor> g;

  static GradBuffers like(const std::vector<Tensor*>& params);
  void zero();
  bool all_finite() const;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, AdamConfig cfg);

  // Applies one update. Throws std::runtime_error on a non-finite gradient
  // (callers wrap this into their divergence handling).
  void step(const GradBuffers& grads);

  std::uint64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

}  // namespace vatlas
