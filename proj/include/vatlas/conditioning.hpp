#pragma once

#include <cstdint>
#include <string>

#include "vatlas/image.hpp"
#include "vatlas/rng.hpp"
#include "vatlas/schedule.hpp"
#include "vatlas/tensor.hpp"

// Fixed (untrained) embedders standing in for the text/image encoders of a
// large pretrained model. Both are deterministic given the embedding seed:
//
//  * captions: lowercase whitespace tokenization, each token hashed (FNV-1a
//    folded with the seed) to seed a dense random direction, accumulated
//    over tokens and then L2-normalized;
//  * reference images: mean over 8x8 patches of a seeded random projection
//    of the patch pixels, L2-normalized.
//
// The null embedding (all zeros) is what classifier-free guidance uses for
// the unconditional branch.

namespace vatlas {

struct ConditioningConfig {
  int text_dim = 32;
  int image_dim = 32;
  int patch = 8;
  std::uint64_t embed_seed = 0x5eedc0de;
};

Tensor embed_caption(const std::string& caption, const ConditioningConfig& cfg);
Tensor embed_reference_image(const Image& img, const ConditioningConfig& cfg);
Tensor null_embedding(int dim);

// Both conditioning channels for one denoiser evaluation; rows are 1 x dim.
struct ConditioningContext {
  Tensor text;   // 1 x text_dim
  Tensor image;  // 1 x image_dim

  static ConditioningContext null_context(const ConditioningConfig& cfg);
};

// Blends the image embedding toward Gaussian noise at schedule level t,
// mirroring how the forward process corrupts latents:
//   e' = sqrt(abar_t) e + sqrt(1-abar_t) n,  n ~ N(0, I/dim)
// Levels above max_level are rejected (invalid_argument): heavily corrupted
// reference embeddings destabilize fine-tuning.
Tensor corrupt_embedding(const Tensor& e, int t, int max_level, const NoiseSchedule& s, Rng& rng);

}  // namespace vatlas
