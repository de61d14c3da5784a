#include "vatlas/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "vatlas/kernels.hpp"

namespace vatlas {

GradBuffers GradBuffers::like(const std::vector<Tensor*>& params) {
  GradBuffers out;
  out.g.reserve(params.size());
  for (const Tensor* p : params) out.g.emplace_back(p->rows, p->cols);
  return out;
}

void GradBuffers::zero() {
  for (Tensor& t : g) t.fill(0.0);
}

bool GradBuffers::all_finite() const {
  for (const Tensor& t : g)
    if (!t.all_finite()) return false;
  return true;
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* p : params_) {
    m_.emplace_back(p->rows, p->cols);
    v_.emplace_back(p->rows, p->cols);
  }
}

void AdamOptimizer::step(const GradBuffers& grads) {
  if (grads.g.size() != params_.size())
    throw std::invalid_argument("AdamOptimizer::step: gradient count mismatch");
  if (!grads.all_finite()) throw std::runtime_error("AdamOptimizer::step: non-finite gradient");
  ++t_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor* p = params_[i];
    if (!p->same_shape(grads.g[i]))
      throw std::invalid_argument("AdamOptimizer::step: gradient shape mismatch");
    kern::adam_update(p->data(), grads.g[i].data(), m_[i].data(), v_[i].data(), p->size(),
                      cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, bias1, bias2);
  }
}

}  // namespace vatlas
