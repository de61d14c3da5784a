#include "vatlas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vatlas {
namespace {

constexpr double kPsnrCap = 99.0;

// Solve a 3x3 linear system in place via Gaussian elimination with partial
// pivoting. Small enough that a library dependency is not worth it.
void solve3(double m[9], double b[3]) {
  int idx[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int best = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[idx[r] * 3 + col]) > std::abs(m[idx[best] * 3 + col])) best = r;
    }
    std::swap(idx[col], idx[best]);
    const double piv = m[idx[col] * 3 + col];
    if (std::abs(piv) < 1e-12) throw std::runtime_error("degenerate gauge fit");
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[idx[r] * 3 + col] / piv;
      for (int c = col; c < 3; ++c) m[idx[r] * 3 + c] -= f * m[idx[col] * 3 + c];
      b[idx[r]] -= f * b[idx[col]];
    }
  }
  double x[3];
  for (int col = 2; col >= 0; --col) {
    double s = b[idx[col]];
    for (int c = col + 1; c < 3; ++c) s -= m[idx[col] * 3 + c] * x[c];
    x[col] = s / m[idx[col] * 3 + col];
  }
  b[0] = x[0];
  b[1] = x[1];
  b[2] = x[2];
}

}  // namespace

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: image shapes differ");
  if (a.px.empty()) throw std::invalid_argument("mse: empty image");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const double d = a.px[i] - b.px[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.px.size());
}

double psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

PsnrReport psnr(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("psnr: sequences must be non-empty and equally long");
  }
  PsnrReport rep;
  for (std::size_t i = 0; i < a.size(); ++i) rep.per_frame.push_back(psnr(a[i], b[i]));
  double sum = 0.0;
  for (double v : rep.per_frame) sum += v;
  rep.mean = sum / static_cast<double>(rep.per_frame.size());
  return rep;
}

AffineFit fit_affine_gauge(const Tensor& pred, const Tensor& gt) {
  if (pred.rows != gt.rows || pred.cols != 2 || gt.cols != 2) {
    throw std::invalid_argument("fit_affine_gauge: expected matching m x 2 inputs");
  }
  if (pred.rows < 3) throw std::invalid_argument("fit_affine_gauge: need at least 3 samples");
  // Normal equations with design rows [gt_u, gt_v, 1]; the Gram matrix is
  // shared between the two output dimensions.
  double gram[9] = {0};
  double rhs_u[3] = {0}, rhs_v[3] = {0};
  for (int i = 0; i < pred.rows; ++i) {
    const double row[3] = {gt.at(i, 0), gt.at(i, 1), 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) gram[r * 3 + c] += row[r] * row[c];
      rhs_u[r] += row[r] * pred.at(i, 0);
      rhs_v[r] += row[r] * pred.at(i, 1);
    }
  }
  double gu[9], gv[9];
  std::copy(gram, gram + 9, gu);
  std::copy(gram, gram + 9, gv);
  solve3(gu, rhs_u);
  solve3(gv, rhs_v);
  AffineFit fit;
  fit.a[0] = rhs_u[0];
  fit.a[1] = rhs_u[1];
  fit.t[0] = rhs_u[2];
  fit.a[2] = rhs_v[0];
  fit.a[3] = rhs_v[1];
  fit.t[1] = rhs_v[2];
  return fit;
}

UvErrorReport uv_error(const Tensor& pred_uv, const Tensor& gt_uv, int texture_size) {
  if (texture_size < 2) throw std::invalid_argument("uv_error: texture_size must be >= 2");
  // Map the prediction onto the ground-truth frame. Measuring residuals in
  // the fixed gt frame makes the metric invariant to affine
  // reparameterizations of the prediction (the gauge freedom); residuals in
  // the prediction's own frame would rescale with it.
  const AffineFit fit = fit_affine_gauge(gt_uv, pred_uv);
  // One uv unit spans texture_size/2 texels (uv covers [-1,1]).
  const double texels_per_uv = 0.5 * texture_size;
  UvErrorReport rep;
  rep.samples = pred_uv.rows;
  double sum = 0.0;
  for (int i = 0; i < pred_uv.rows; ++i) {
    const double pu = pred_uv.at(i, 0), pv = pred_uv.at(i, 1);
    const double mu = fit.a[0] * pu + fit.a[1] * pv + fit.t[0];
    const double mv = fit.a[2] * pu + fit.a[3] * pv + fit.t[1];
    const double du = gt_uv.at(i, 0) - mu;
    const double dv = gt_uv.at(i, 1) - mv;
    const double dist = std::sqrt(du * du + dv * dv) * texels_per_uv;
    sum += dist;
    rep.max_texels = std::max(rep.max_texels, dist);
  }
  rep.mean_texels = sum / static_cast<double>(rep.samples);
  return rep;
}

double temporal_consistency(const std::vector<Image>& frames, const GroundTruth& gt) {
  if (frames.size() != gt.alphas.size() || frames.size() < 2) {
    throw std::invalid_argument("temporal_consistency: need >= 2 frames matching ground truth");
  }
  double acc = 0.0;
  std::size_t count = 0;
  double warped[4];
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    const Image& cur = frames[k + 1];
    const Image& prev = frames[k];
    const Image& flow = gt.flow_back[k];
    const Image& alpha = gt.alphas[k + 1];
    if (!cur.same_shape(prev) || cur.w != alpha.w || cur.h != alpha.h) {
      throw std::invalid_argument("temporal_consistency: frame shapes differ from ground truth");
    }
    for (int y = 0; y < cur.h; ++y) {
      for (int x = 0; x < cur.w; ++x) {
        if (alpha.at(y, x, 0) < 0.5) continue;
        const double sx = x + 0.5 + flow.at(y, x, 0);
        const double sy = y + 0.5 + flow.at(y, x, 1);
        prev.sample_bilinear(sx, sy, warped);
        for (int c = 0; c < cur.c; ++c) {
          acc += std::abs(cur.at(y, x, c) - warped[c]);
          ++count;
        }
      }
    }
  }
  if (count == 0) throw std::runtime_error("temporal_consistency: no foreground pixels");
  return acc / static_cast<double>(count);
}

}  // namespace vatlas
