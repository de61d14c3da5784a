#pragma once

#include <string>
#include <vector>

#include "vatlas/adam.hpp"
#include "vatlas/checkpoint.hpp"
#include "vatlas/conditioning.hpp"
#include "vatlas/image.hpp"
#include "vatlas/rng.hpp"
#include "vatlas/schedule.hpp"
#include "vatlas/tape.hpp"
#include "vatlas/tensor.hpp"

// Small pixel-space denoiser predicting v at a fixed image size. The trunk
// is a fully connected net over the flattened image; a learned linear map of
// the conditioning vector (timestep features + caption embedding + reference
// image embedding) is added to the first hidden pre-activation:
//
//   h0 = relu(z w_in + b_in + cond w_cond)
//   hk = relu(h_{k-1} w_k + b_k)            k = 1..hidden_layers-1
//   v  = h_last w_out + b_out               (identity output; v is unbounded)
//
// Latents are images mapped to [-1, 1] (z = 2*pixel - 1).

namespace vatlas {

struct DenoiserConfig {
  int image_size = 32;
  int channels = 3;
  int hidden = 128;
  int hidden_layers = 2;  // >= 1; the first hidden layer receives the conditioning
  int time_freqs = 4;     // timestep t/T is positionally encoded with this many bands
  ConditioningConfig cond;
};

struct DenoiserNetwork {
  DenoiserConfig cfg;
  Tensor w_in, b_in;   // D x H, 1 x H
  Tensor w_cond;       // C x H (no bias; b_in covers it)
  std::vector<MlpNetwork::Layer> hidden;  // (hidden_layers - 1) H x H layers
  Tensor w_out, b_out;  // H x D, 1 x D

  static DenoiserNetwork make(const DenoiserConfig& cfg, Rng& rng);

  int data_width() const { return cfg.image_size * cfg.image_size * cfg.channels; }
  int cond_width() const {
    return 1 + 2 * cfg.time_freqs + cfg.cond.text_dim + cfg.cond.image_dim;
  }

  // Conditioning row for one evaluation: [time features | text | image].
  // Timestep features always present; `conditioned` false zeroes the rest
  // (the classifier-free unconditional branch).
  Tensor cond_row(int t, const NoiseSchedule& s, const ConditioningContext& ctx,
                  bool conditioned = true) const;

  Tensor forward(const Tensor& z, const Tensor& cond) const;

  struct Bind {
    std::vector<int> params;
    int out = -1;
  };
  Bind build(ad::Tape& t, int z_node, int cond_node);

  std::vector<Tensor*> params();
  std::size_t param_count() const;

  void add_to_checkpoint(Checkpoint& ckpt, const std::string& prefix) const;
  static DenoiserNetwork from_checkpoint(const Checkpoint& ckpt, const std::string& prefix);
};

// ---- training ----

struct DenoiserExample {
  Tensor z0;  // 1 x D, in [-1, 1]
  ConditioningContext ctx;
};

struct DenoiserTrainConfig {
  int steps = 2000;
  int batch = 8;
  double lr = 1e-4;
  double cond_dropout = 0.1;  // chance of training a row unconditionally
  std::uint64_t seed = 1;
};

// In-place base training on an example corpus; returns the loss trace.
std::vector<LossLogRow> train_denoiser(DenoiserNetwork& net,
                                       const std::vector<DenoiserExample>& corpus,
                                       const NoiseSchedule& s, const DenoiserTrainConfig& cfg);

struct FinetuneConfig {
  int steps = 150;
  double lr = 1e-5;
  int batch = 4;
  int noise_cap = 50;  // max schedule level for reference-embedding corruption
  std::uint64_t seed = 2;
};

// One-shot adaptation toward a single edited/source crop. Every step draws a
// random reference crop, corrupts its embedding at a level within the cap,
// and trains the v objective on the target crop alone. steps == 0 leaves the
// network untouched.
std::vector<LossLogRow> finetune_denoiser(DenoiserNetwork& net, const Image& target_crop,
                                          const std::string& caption,
                                          const std::vector<Image>& reference_crops,
                                          const NoiseSchedule& s, const FinetuneConfig& cfg);

// ---- deterministic sampling ----

struct LatentState {
  Tensor z;  // 1 x D
  int t = 0; // schedule level of z
};

// Guided v prediction at level t (classifier-free guidance when scale != 1).
Tensor predict_v_guided(const DenoiserNetwork& net, const Tensor& z, int t,
                        const NoiseSchedule& s, const ConditioningContext& ctx, double cfg_scale);

// Walk init.t -> 0 with deterministic steps; returns z0.
Tensor ddim_sample(const DenoiserNetwork& net, LatentState init, const ConditioningContext& ctx,
                   const NoiseSchedule& s, double cfg_scale);

// Walk 0 -> to_t with deterministic inverse steps; returns the latent at to_t.
Tensor ddim_invert(const DenoiserNetwork& net, const Tensor& z0, int to_t,
                   const ConditioningContext& ctx, const NoiseSchedule& s, double cfg_scale);

// Image <-> latent helpers ([0,1] pixels vs [-1,1] latents; no clamping).
Tensor latent_from_image(const Image& img);
Image image_from_latent(const Tensor& z, int size, int channels);

}  // namespace vatlas
