#include "vatlas/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vatlas/adam.hpp"
#include "vatlas/encoding.hpp"
#include "vatlas/errors.hpp"
#include "vatlas/kernels.hpp"

namespace vatlas {

namespace {

// uv' = uv/2 +- 1/2 on the tape (see to_half_plane).
int half_plane_node(ad::Tape& t, int uv, AtlasLayer layer) {
  const int rows = t.rows(uv);
  Tensor scale_cols(rows, 2), shift_cols(rows, 2);
  for (int r = 0; r < rows; ++r) {
    scale_cols.at(r, 0) = 0.5;
    scale_cols.at(r, 1) = 1.0;
    shift_cols.at(r, 0) = layer == AtlasLayer::Foreground ? 0.5 : -0.5;
    shift_cols.at(r, 1) = 0.0;
  }
  return t.add(t.mul(uv, t.constant(scale_cols)), t.constant(shift_cols));
}

// tanh output -> unit interval: y/2 + 1/2.
int to_unit(ad::Tape& t, int node) { return t.add_scalar(t.scale(node, 0.5), 0.5); }

// Mask-derived anchoring of the foreground mapping. Reconstruction alone is
// invariant to any reparameterization of the uv space, so the optimizer
// needs a consistent, well-scaled starting point: pretraining the foreground
// map toward mask-centroid-centered coordinates (one shared zoom, per-frame
// centroid) makes every frame send the same object point to the same atlas
// point from the very first joint iteration and lets the object fill its
// atlas half-plane instead of a sliver of it.
struct ForegroundStats {
  std::vector<std::vector<std::pair<int, int>>> pixels;  // mask >= threshold, per frame
  std::vector<double> cx, cy;                            // mask-weighted centroids
  double radius = 0.0;                                   // shared scale (px)
  bool any = false;
};

ForegroundStats foreground_stats(const std::vector<Image>& masks) {
  constexpr double kThreshold = 0.05;
  ForegroundStats st;
  st.pixels.resize(masks.size());
  st.cx.resize(masks.size(), 0.0);
  st.cy.resize(masks.size(), 0.0);
  double radius_sum = 0.0;
  int radius_frames = 0;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const Image& mk = masks[k];
    double wsum = 0.0, xsum = 0.0, ysum = 0.0;
    for (int y = 0; y < mk.h; ++y) {
      for (int x = 0; x < mk.w; ++x) {
        const double w = mk.at(y, x, 0);
        if (w < kThreshold) continue;
        st.pixels[k].push_back({x, y});
        wsum += w;
        xsum += w * x;
        ysum += w * y;
      }
    }
    if (wsum <= 0.0) continue;
    st.cx[k] = xsum / wsum;
    st.cy[k] = ysum / wsum;
    double rsum = 0.0;
    for (const auto& [x, y] : st.pixels[k]) {
      const double dx = x - st.cx[k], dy = y - st.cy[k];
      rsum += mk.at(y, x, 0) * (dx * dx + dy * dy);
    }
    radius_sum += std::sqrt(rsum / wsum);
    ++radius_frames;
    st.any = true;
  }
  // An RMS radius underestimates the support radius (~R/sqrt(2) for a disc);
  // 1.5x covers the full object with margin.
  if (radius_frames > 0) st.radius = 1.5 * (radius_sum / radius_frames);
  return st;
}

}  // namespace

DecompositionResult train_decomposition(const std::vector<Image>& frames,
                                        const std::vector<Image>& masks,
                                        const DecompositionConfig& cfg) {
  if (frames.empty()) throw std::invalid_argument("train_decomposition: no frames");
  if (masks.size() != frames.size())
    throw std::invalid_argument("train_decomposition: mask count must match frame count");
  const VideoDims dims{frames[0].w, frames[0].h, int(frames.size())};
  for (const Image& f : frames)
    if (f.w != dims.width || f.h != dims.height || f.c != 3)
      throw std::invalid_argument("train_decomposition: inconsistent frame shapes");
  for (const Image& m : masks)
    if (m.w != dims.width || m.h != dims.height || m.c != 1)
      throw std::invalid_argument("train_decomposition: masks must be single-channel");

  Rng rng(cfg.seed);
  AtlasModel model = AtlasModel::make(cfg.model, dims, rng);
  const int B = cfg.model.pos_freqs;
  const int m = cfg.batch;

  const ForegroundStats fg_stats = foreground_stats(masks);
  constexpr double kFgZoom = 0.8;  // pretrain maps the object radius to this uv radius

  // Draws a point inside the mask support of a random frame.
  auto sample_fg_point = [&](PixelPoint& p) {
    int k = rng.uniform_int(0, dims.frames - 1);
    while (fg_stats.pixels[k].empty()) k = rng.uniform_int(0, dims.frames - 1);
    const auto& list = fg_stats.pixels[k];
    const auto& [x, y] = list[rng.uniform_int(0, int(list.size()) - 1)];
    p = {double(x), double(y), k};
  };

  // ---- pretraining of the mapping networks ----
  // Background: scaled identity over the frame. Foreground: mask-anchored
  // object coordinates when a mask support exists, identity otherwise.
  {
    std::vector<Tensor*> params = model.map_bg.params();
    for (Tensor* p : model.map_fg.params()) params.push_back(p);
    AdamOptimizer opt(params, AdamConfig{cfg.pretrain_lr, 0.9, 0.999, 1e-8});
    GradBuffers grads = GradBuffers::like(params);
    for (int it = 0; it < cfg.pretrain_iterations; ++it) {
      std::vector<PixelPoint> pts(m);
      for (PixelPoint& p : pts)
        p = {double(rng.uniform_int(0, dims.width - 1)), double(rng.uniform_int(0, dims.height - 1)),
             rng.uniform_int(0, dims.frames - 1)};
      const Tensor norm = normalized_points(pts, dims);
      Tensor target(m, 2);
      for (int r = 0; r < m; ++r) {
        target.at(r, 0) = cfg.identity_scale * norm.at(r, 0);
        target.at(r, 1) = cfg.identity_scale * norm.at(r, 1);
      }

      std::vector<PixelPoint> pts_fg = pts;
      Tensor target_fg = target;
      if (fg_stats.any) {
        for (int r = 0; r < m; ++r) {
          sample_fg_point(pts_fg[r]);
          const int k = pts_fg[r].k;
          const double u = kFgZoom * (pts_fg[r].x - fg_stats.cx[k]) / fg_stats.radius;
          const double v = kFgZoom * (pts_fg[r].y - fg_stats.cy[k]) / fg_stats.radius;
          target_fg.at(r, 0) = std::clamp(u, -0.95, 0.95);
          target_fg.at(r, 1) = std::clamp(v, -0.95, 0.95);
        }
      }

      ad::Tape tape;
      const int enc = tape.constant(positional_encode(norm, B));
      const int enc_fg = tape.constant(positional_encode(normalized_points(pts_fg, dims), B));
      MlpNetwork::TapeBind bg = model.map_bg.build(tape, enc);
      MlpNetwork::TapeBind fg = model.map_fg.build(tape, enc_fg);
      const int db = tape.sub(bg.out, tape.constant(target));
      const int df = tape.sub(fg.out, tape.constant(target_fg));
      const int loss = tape.scale(
          tape.add(tape.reduce_sum(tape.mul(db, db)), tape.reduce_sum(tape.mul(df, df))),
          1.0 / m);
      const double lv = tape.scalar_value(loss);
      if (!std::isfinite(lv)) throw DivergenceError("decompose/pretrain", cfg.seed, it);
      tape.backward(loss);
      grads.zero();
      model.map_bg.accumulate_grads(tape, bg, grads.g);
      model.map_fg.accumulate_grads(tape, fg, grads.g, model.map_bg.params().size());
      opt.step(grads);
    }
  }

  // ---- joint training ----
  std::vector<Tensor*> params;
  for (Tensor* p : model.map_bg.params()) params.push_back(p);
  for (Tensor* p : model.map_fg.params()) params.push_back(p);
  for (Tensor* p : model.alpha.params()) params.push_back(p);
  for (Tensor* p : model.atlas.params()) params.push_back(p);
  AdamOptimizer opt(params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  GradBuffers grads = GradBuffers::like(params);
  const std::size_t n_map = model.map_bg.params().size();

  // The object covers a small share of the pixels; an unbiased batch spends
  // almost all of its rows on background. Drawing part of the batch from the
  // mask support keeps a steady gradient on the foreground networks.
  const int m_fg = fg_stats.any ? int(m * std::clamp(cfg.fg_batch_fraction, 0.0, 1.0)) : 0;

  std::vector<DecompositionLossRow> losses;
  for (int it = 0; it < cfg.iterations; ++it) {
    // Cosine decay stops the end-stage oscillation a constant step produces.
    const double progress = cfg.iterations > 1 ? double(it) / double(cfg.iterations - 1) : 1.0;
    const double anneal = 0.05 + 0.95 * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
    opt.set_learning_rate(cfg.lr * anneal);

    std::vector<PixelPoint> pts(m);
    Tensor target_rgb(m, 3), target_a(m, 1);
    std::vector<PixelPoint> pts_alt(m);  // same (x, y), different frame
    for (int r = 0; r < m; ++r) {
      if (r < m_fg) {
        sample_fg_point(pts[r]);
      } else {
        pts[r] = {double(rng.uniform_int(0, dims.width - 1)),
                  double(rng.uniform_int(0, dims.height - 1)),
                  rng.uniform_int(0, dims.frames - 1)};
      }
      const int x = int(pts[r].x), y = int(pts[r].y), k = pts[r].k;
      pts_alt[r] = {double(x), double(y), rng.uniform_int(0, dims.frames - 1)};
      for (int c = 0; c < 3; ++c) target_rgb.at(r, c) = frames[k].at(y, x, c);
      target_a.at(r, 0) = masks[k].at(y, x, 0);
    }
    const Tensor norm = normalized_points(pts, dims);
    const Tensor norm_alt = normalized_points(pts_alt, dims);

    // Anchor targets for the foreground rows of the batch (zero weight on
    // the uniform remainder). Holding the mapping near the mask-derived
    // coordinates while the atlas is still learning keeps the early noisy
    // color gradients from walking the mapping out of the consistent gauge;
    // the anchor is exactly compatible with reconstruction for rigid motion,
    // so it costs nothing at convergence.
    Tensor anchor_uv(m, 2), anchor_rows(m, 1);
    for (int r = 0; r < m_fg; ++r) {
      const int k = pts[r].k;
      const double u = kFgZoom * (pts[r].x - fg_stats.cx[k]) / fg_stats.radius;
      const double v = kFgZoom * (pts[r].y - fg_stats.cy[k]) / fg_stats.radius;
      anchor_uv.at(r, 0) = std::clamp(u, -0.95, 0.95);
      anchor_uv.at(r, 1) = std::clamp(v, -0.95, 0.95);
      anchor_rows.at(r, 0) = 1.0;
    }

    ad::Tape tape;
    const int enc = tape.constant(positional_encode(norm, B));
    const int enc_alt = tape.constant(positional_encode(norm_alt, B));

    MlpNetwork::TapeBind bg = model.map_bg.build(tape, enc);
    MlpNetwork::TapeBind fg = model.map_fg.build(tape, enc);
    MlpNetwork::TapeBind al = model.alpha.build(tape, enc);
    const int a_unit = to_unit(tape, al.out);

    MlpNetwork::TapeBind atlas_bg =
        model.atlas.build(tape, tape.pos_encode(half_plane_node(tape, bg.out, AtlasLayer::Background), B));
    MlpNetwork::TapeBind atlas_fg =
        model.atlas.build(tape, tape.pos_encode(half_plane_node(tape, fg.out, AtlasLayer::Foreground), B));
    const int c_bg = to_unit(tape, atlas_bg.out);
    const int c_fg = to_unit(tape, atlas_fg.out);

    const int one_minus_a = tape.add_scalar(tape.scale(a_unit, -1.0), 1.0);
    const int recon = tape.add(tape.mul_col(c_fg, a_unit), tape.mul_col(c_bg, one_minus_a));

    const int d_rgb = tape.sub(recon, tape.constant(target_rgb));
    const int l_rgb = tape.scale(tape.reduce_sum(tape.mul(d_rgb, d_rgb)), 1.0 / m);
    const int d_a = tape.sub(a_unit, tape.constant(target_a));
    const int l_alpha = tape.scale(tape.reduce_sum(tape.mul(d_a, d_a)), 1.0 / m);

    MlpNetwork::TapeBind bg_alt = model.map_bg.build(tape, enc_alt);
    const int d_tmp = tape.sub(bg.out, bg_alt.out);
    const int l_tmp = tape.scale(tape.reduce_sum(tape.mul(d_tmp, d_tmp)), 1.0 / m);

    // The anchor target is exactly reconstruction-compatible for rigid
    // motion, so it stays at full strength: it pins the uv gauge without
    // competing with the color refinement.
    const double anchor_w = m_fg > 0 ? cfg.anchor_weight : 0.0;
    const int d_anchor = tape.mul_col(tape.sub(fg.out, tape.constant(anchor_uv)),
                                      tape.constant(anchor_rows));
    const int l_anchor =
        tape.scale(tape.reduce_sum(tape.mul(d_anchor, d_anchor)), 1.0 / std::max(1, m_fg));

    const int loss = tape.add(
        tape.add(l_rgb, tape.scale(l_anchor, anchor_w)),
        tape.add(tape.scale(l_alpha, cfg.alpha_weight),
                 tape.scale(l_tmp, cfg.bg_temporal_weight)));

    const double lv = tape.scalar_value(loss);
    if (!std::isfinite(lv)) throw DivergenceError("decompose", cfg.seed, it);
    tape.backward(loss);

    grads.zero();
    model.map_bg.accumulate_grads(tape, bg, grads.g);
    model.map_bg.accumulate_grads(tape, bg_alt, grads.g);
    model.map_fg.accumulate_grads(tape, fg, grads.g, n_map);
    model.alpha.accumulate_grads(tape, al, grads.g, 2 * n_map);
    const std::size_t atlas_off = 2 * n_map + model.alpha.params().size();
    model.atlas.accumulate_grads(tape, atlas_bg, grads.g, atlas_off);
    model.atlas.accumulate_grads(tape, atlas_fg, grads.g, atlas_off);
    opt.step(grads);

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      DecompositionLossRow row;
      row.step = it;
      row.rgb = tape.scalar_value(l_rgb);
      row.alpha = tape.scalar_value(l_alpha);
      row.temporal = tape.scalar_value(l_tmp);
      row.total = lv;
      losses.push_back(row);
    }
  }

  return {std::move(model), std::move(losses)};
}

}  // namespace vatlas
