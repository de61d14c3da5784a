#pragma once

#include <vector>

#include "vatlas/image.hpp"
#include "vatlas/synth.hpp"
#include "vatlas/tensor.hpp"

// Evaluation metrics for reconstructed / edited video against synthetic
// ground truth. All of these are plain math with pinned formulas so tests can
// check them against independent scalar oracles.

namespace vatlas {

// Mean squared error over all pixels and channels. Shapes must match.
double mse(const Image& a, const Image& b);

struct PsnrReport {
  std::vector<double> per_frame;  // dB, capped at 99 for (near-)identical frames
  double mean = 0.0;              // arithmetic mean of per_frame
};

// psnr = 10*log10(1/mse) for signals in [0,1]; capped at 99 dB.
double psnr(const Image& a, const Image& b);
PsnrReport psnr(const std::vector<Image>& a, const std::vector<Image>& b);

struct AffineFit {
  // pred ~= A * gt + t, row-major 2x2 plus offset.
  double a[4] = {1.0, 0.0, 0.0, 1.0};
  double t[2] = {0.0, 0.0};
};

// Least-squares affine map from gt (m x 2) onto pred (m x 2).
AffineFit fit_affine_gauge(const Tensor& pred, const Tensor& gt);

struct UvErrorReport {
  double mean_texels = 0.0;
  double max_texels = 0.0;
  int samples = 0;
};

// Residual of predicted uv against ground-truth sprite coordinates after
// removing the best affine transform between the two frames of reference
// (the atlas parameterization is only defined up to such a gauge). The
// prediction is mapped onto the gt frame and residuals measured there, which
// makes the metric invariant to affine reparameterizations of the
// prediction. Reported in texel units of a `texture_size`^2 atlas spanning
// [-1,1].
UvErrorReport uv_error(const Tensor& pred_uv, const Tensor& gt_uv, int texture_size);

// Mean absolute error between each frame and its predecessor warped along the
// ground-truth flow, restricted to foreground pixels (gt alpha >= 0.5).
// Perfectly consistent video scores ~0; temporally uncorrelated uniform
// noise scores ~1/3.
double temporal_consistency(const std::vector<Image>& frames, const GroundTruth& gt);

}  // namespace vatlas
