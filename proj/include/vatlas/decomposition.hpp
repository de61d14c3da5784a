#pragma once

#include <vector>

#include "vatlas/atlas_model.hpp"
#include "vatlas/image.hpp"

// Trains the atlas decomposition on a source video. Each iteration samples a
// batch of integer pixel locations and minimizes
//
//   L = L_rgb + w_alpha * L_alpha + w_temporal * L_temporal
//
//   L_rgb      mean over the batch of the squared color error of the blend;
//   L_alpha    mean squared error of the opacity against the given masks;
//   L_temporal mean squared difference between the background uv of a point
//              and of the same (x, y) at another random frame - a static
//              background rig that keeps M_b constant over time.
//
// Both mapping networks are first pretrained toward the scaled identity map
// (x, y, k) -> s*(nx, ny) so uv coordinates start out spread over the atlas
// rather than collapsed at a point.

namespace vatlas {

struct DecompositionConfig {
  AtlasModelConfig model;
  int iterations = 3000;
  int batch = 1024;
  double lr = 1e-3;
  double alpha_weight = 1.0;
  double bg_temporal_weight = 0.05;
  int pretrain_iterations = 2000;
  double pretrain_lr = 1e-3;
  double identity_scale = 0.9;
  double fg_batch_fraction = 0.4;  // batch share drawn from the mask support
  double anchor_weight = 3.0;      // mask-anchor pull on the fg mapping
  int log_every = 25;
  std::uint64_t seed = 1;
};

struct DecompositionLossRow {
  int step = 0;
  double rgb = 0.0;
  double alpha = 0.0;
  double temporal = 0.0;
  double total = 0.0;
};

struct DecompositionResult {
  AtlasModel model;
  std::vector<DecompositionLossRow> losses;
};

// frames: RGB video; masks: per-frame single-channel opacity targets (must
// match frames in count and size). Throws DivergenceError on non-finite loss.
DecompositionResult train_decomposition(const std::vector<Image>& frames,
                                        const std::vector<Image>& masks,
                                        const DecompositionConfig& cfg);

}  // namespace vatlas
