#pragma once

#include <vector>

#include "vatlas/tensor.hpp"

// Discrete diffusion noise schedule and the deterministic (DDIM) transport
// built on it, in the v-prediction parameterization.
//
// With abar(t) the cumulative signal level (abar(0) = 1):
//   forward:  z_t = sqrt(abar_t) z_0 + sqrt(1-abar_t) eps
//   v target: v   = sqrt(abar_t) eps - sqrt(1-abar_t) z_0
// which inverts algebraically as
//   eps = sqrt(abar_t) v + sqrt(1-abar_t) z_t
//   z_0 = sqrt(abar_t) z_t - sqrt(1-abar_t) v
// The deterministic step between adjacent levels (either direction) is
//   z_s = sqrt(abar_s/abar_t) z_t
//       + sqrt(abar_s) (sqrt(1/abar_s - 1) - sqrt(1/abar_t - 1)) eps_hat
// Stepping t -> t-1 and then inverting t-1 -> t with the same eps_hat (or
// vice versa) cancels exactly; that algebraic identity is what makes DDIM
// inversion meaningful.

namespace vatlas {

struct NoiseSchedule {
  int steps = 0;                  // T
  std::vector<double> abar;       // abar[0..T], abar[0] = 1

  // Linear beta ramp: beta_t = beta_min + (beta_max-beta_min)*(t-1)/(T-1),
  // abar_t = prod_{i<=t} (1 - beta_i).
  static NoiseSchedule linear_beta(int steps, double beta_min, double beta_max);

  double abar_at(int t) const;    // throws if t outside [0, T]
};

// z_t from z_0; eps must be shaped like z0.
Tensor add_noise(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& s);

Tensor v_target(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& s);
Tensor eps_from_v(const Tensor& v, const Tensor& zt, int t, const NoiseSchedule& s);
Tensor z0_from_v(const Tensor& v, const Tensor& zt, int t, const NoiseSchedule& s);

// One deterministic step t -> t-1 (ddim_step, t in [1, T]) or t -> t+1
// (ddim_invert_step, t in [0, T-1]).
Tensor ddim_step(const Tensor& zt, const Tensor& eps_hat, int t, const NoiseSchedule& s);
Tensor ddim_invert_step(const Tensor& zt, const Tensor& eps_hat, int t, const NoiseSchedule& s);

// Classifier-free guidance: v_u + scale * (v_c - v_u).
Tensor cfg_combine(const Tensor& v_uncond, const Tensor& v_cond, double scale);

}  // namespace vatlas
