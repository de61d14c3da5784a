#pragma once

#include <vector>

// Square texel grid over a uv rectangle, sampled bilinearly.
//
// Texel (i, j) (column i along u, row j along v) has its center at
//   u = u0 + (i + 0.5) * (u1 - u0) / size     (likewise v with j).
// Sampling maps uv to the continuous texel coordinate
//   s = (u - u0) / (u1 - u0) * size - 0.5,
// clamps s (and t) to [0, size-1] (border clamp), and blends the four
// neighbouring texel centers. With fu, fv the fractional parts the exact
// arithmetic is, per channel and in this order:
//   value = (1-fu)*(1-fv)*t00 + fu*(1-fv)*t10 + (1-fu)*fv*t01 + fu*fv*t11
//   d/du  = ((t10-t00)*(1-fv) + (t11-t01)*fv) * ds/du
//   d/dv  = ((t01-t00)*(1-fu) + (t11-t10)*fu) * ds/dv
// ds/du is size/(u1-u0) strictly inside the clamp range and 0 where the
// coordinate clamps, so the uv-gradient is the one-sided piecewise-constant
// derivative of the interpolant (it disagrees with finite differences only
// exactly on cell boundaries).

namespace vatlas {

struct AtlasTexture {
  int size = 0;      // texels per side; must be >= 2 to sample
  int channels = 0;  // 1, 3 or 4
  std::vector<double> texels;  // row-major: (j * size + i) * channels + c
  double u0 = -1.0, v0 = -1.0, u1 = 1.0, v1 = 1.0;

  AtlasTexture() = default;
  AtlasTexture(int size_, int channels_);

  double& at(int j, int i, int c) { return texels[(std::size_t(j) * size + i) * channels + c]; }
  double at(int j, int i, int c) const { return texels[(std::size_t(j) * size + i) * channels + c]; }

  // Center uv of texel (i, j).
  double texel_u(int i) const { return u0 + (i + 0.5) * (u1 - u0) / size; }
  double texel_v(int j) const { return v0 + (j + 0.5) * (v1 - v0) / size; }

  // Copy of one channel plane, or a channel-subset texture.
  AtlasTexture channel_slice(int first, int count) const;
};

struct BilinearSample {
  double value[4] = {0, 0, 0, 0};
  double du[4] = {0, 0, 0, 0};
  double dv[4] = {0, 0, 0, 0};
  int channels = 0;
};

// Evaluate the texture and its uv-derivatives at (u, v). Throws
// std::invalid_argument if the texture has size < 2.
BilinearSample bilinear_sample(const AtlasTexture& tex, double u, double v);

// Bilinear resample to a new side length (uv rectangle is preserved).
AtlasTexture resize_texture(const AtlasTexture& tex, int new_size);

struct Image;

// Texel grid <-> square image (values copied verbatim, uv rectangle of the
// produced texture is the default [-1,1]^2).
Image texture_to_image(const AtlasTexture& tex);
AtlasTexture texture_from_image(const Image& img);

}  // namespace vatlas
