#pragma once

#include <vector>

#include "vatlas/checkpoint.hpp"
#include "vatlas/image.hpp"
#include "vatlas/mlp.hpp"
#include "vatlas/rng.hpp"
#include "vatlas/texture.hpp"

// Two-layer video decomposition: per-pixel mapping networks carry every
// video location p = (x, y, k) into a background or foreground atlas, an
// opacity network separates the layers, and one shared atlas network turns
// atlas coordinates into color:
//
//   uv_bg = M_b(p), uv_fg = M_f(p)   in (-1,1)^2, layer-local
//   alpha = (tanh + 1)/2             in (0,1)
//   color(p) = (1 - alpha) A(bg half-plane uv_bg) + alpha A(fg half-plane uv_fg)
//
// The shared atlas splits by half-plane along u: layer-local u maps to
// u' = u/2 - 1/2 for the background and u' = u/2 + 1/2 for the foreground,
// so foreground content lives at u' > 0 and background at u' < 0.
//
// Video coordinates are normalized to pixel centers before encoding:
//   nx = 2(x + 0.5)/W - 1, ny = 2(y + 0.5)/H - 1, nk = 2k/(N-1) - 1.

namespace vatlas {

struct VideoDims {
  int width = 0;
  int height = 0;
  int frames = 0;
};

struct PixelPoint {
  double x = 0.0;  // pixel units; integer values address pixel centers
  double y = 0.0;
  int k = 0;
};

enum class AtlasLayer { Background, Foreground };

struct AtlasModelConfig {
  int pos_freqs = 6;  // encoding bands for both (x,y,k) and uv inputs
  int hidden = 64;
  int depth = 4;      // hidden layers per network
};

struct AtlasModel {
  AtlasModelConfig cfg;
  VideoDims dims;
  MlpNetwork map_bg;  // enc(x,y,k) -> uv, tanh
  MlpNetwork map_fg;  // enc(x,y,k) -> uv, tanh
  MlpNetwork alpha;   // enc(x,y,k) -> opacity, tanh mapped to (0,1)
  MlpNetwork atlas;   // enc(u',v') -> rgb, tanh mapped to (0,1)

  static AtlasModel make(const AtlasModelConfig& cfg, const VideoDims& dims, Rng& rng);

  void add_to_checkpoint(Checkpoint& ckpt) const;
  static AtlasModel from_checkpoint(const Checkpoint& ckpt);
};

// (x, y, k) -> normalized rows, m x 3.
Tensor normalized_points(const std::vector<PixelPoint>& pts, const VideoDims& dims);

// Layer-local uv -> shared-atlas half-plane coordinates.
void to_half_plane(Tensor& uv, AtlasLayer layer);

struct MappingEval {
  Tensor uv_bg;   // m x 2, layer-local
  Tensor uv_fg;   // m x 2, layer-local
  Tensor alpha;   // m x 1 in (0,1)
};

MappingEval evaluate_mappings(const AtlasModel& model, const Tensor& norm_pts);

// Colors for layer-local uv rows through the shared atlas network.
Tensor atlas_colors(const AtlasModel& model, const Tensor& uv_local, AtlasLayer layer);

// Full per-pixel reconstruction (the blend above) for normalized points.
Tensor reconstruct_pixels(const AtlasModel& model, const Tensor& norm_pts);

// Whole-video renders.
std::vector<Image> render_reconstruction(const AtlasModel& model);
std::vector<Image> render_alpha(const AtlasModel& model);

// Bake one layer into a texture over layer-local [-1,1]^2. The foreground
// gains an alpha channel: for every video pixel, its opacity is splatted as
// a max into the four texels around its mapped uv, so texels never touched
// by any frame keep alpha 0.
AtlasTexture discretize_atlas(const AtlasModel& model, AtlasLayer layer, int size);

}  // namespace vatlas
