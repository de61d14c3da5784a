#include "vatlas/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "vatlas/kernels.hpp"

namespace vatlas {

NoiseSchedule NoiseSchedule::linear_beta(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw std::invalid_argument("NoiseSchedule: steps must be >= 1");
  if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max)
    throw std::invalid_argument("NoiseSchedule: need 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.abar.resize(steps + 1);
  s.abar[0] = 1.0;
  double acc = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps > 1 ? double(t - 1) / double(steps - 1) : 0.0;
    const double beta = beta_min + (beta_max - beta_min) * frac;
    acc *= 1.0 - beta;
    s.abar[t] = acc;
  }
  return s;
}

double NoiseSchedule::abar_at(int t) const {
  if (t < 0 || t > steps) throw std::out_of_range("NoiseSchedule: step index out of range");
  return abar[t];
}

namespace {

// y = ca * a + cb * b, elementwise over equally shaped tensors.
Tensor lincomb(double ca, const Tensor& a, double cb, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
  Tensor y(a.rows, a.cols);
  kern::scale(a.data(), ca, y.data(), y.size());
  kern::axpy(cb, b.data(), y.data(), y.size());
  return y;
}

}  // namespace

Tensor add_noise(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& s) {
  const double ab = s.abar_at(t);
  return lincomb(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps, "add_noise");
}

Tensor v_target(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& s) {
  const double ab = s.abar_at(t);
  return lincomb(std::sqrt(ab), eps, -std::sqrt(1.0 - ab), z0, "v_target");
}

Tensor eps_from_v(const Tensor& v, const Tensor& zt, int t, const NoiseSchedule& s) {
  const double ab = s.abar_at(t);
  return lincomb(std::sqrt(ab), v, std::sqrt(1.0 - ab), zt, "eps_from_v");
}

Tensor z0_from_v(const Tensor& v, const Tensor& zt, int t, const NoiseSchedule& s) {
  const double ab = s.abar_at(t);
  return lincomb(std::sqrt(ab), zt, -std::sqrt(1.0 - ab), v, "z0_from_v");
}

namespace {

Tensor ddim_transport(const Tensor& zt, const Tensor& eps_hat, double ab_from, double ab_to,
                      const char* what) {
  const double scale_z = std::sqrt(ab_to / ab_from);
  const double scale_e =
      std::sqrt(ab_to) * (std::sqrt(1.0 / ab_to - 1.0) - std::sqrt(1.0 / ab_from - 1.0));
  return lincomb(scale_z, zt, scale_e, eps_hat, what);
}

}  // namespace

Tensor ddim_step(const Tensor& zt, const Tensor& eps_hat, int t, const NoiseSchedule& s) {
  if (t < 1 || t > s.steps) throw std::out_of_range("ddim_step: t must be in [1, T]");
  return ddim_transport(zt, eps_hat, s.abar_at(t), s.abar_at(t - 1), "ddim_step");
}

Tensor ddim_invert_step(const Tensor& zt, const Tensor& eps_hat, int t, const NoiseSchedule& s) {
  if (t < 0 || t > s.steps - 1)
    throw std::out_of_range("ddim_invert_step: t must be in [0, T-1]");
  return ddim_transport(zt, eps_hat, s.abar_at(t), s.abar_at(t + 1), "ddim_invert_step");
}

Tensor cfg_combine(const Tensor& v_uncond, const Tensor& v_cond, double scale) {
  Tensor diff = lincomb(1.0, v_cond, -1.0, v_uncond, "cfg_combine");
  return lincomb(1.0, v_uncond, scale, diff, "cfg_combine");
}

}  // namespace vatlas
