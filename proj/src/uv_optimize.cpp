#include "vatlas/uv_optimize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vatlas/encoding.hpp"
#include "vatlas/errors.hpp"

namespace vatlas {
namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

AtlasTexture rgb_view(const AtlasTexture& tex) {
  if (tex.channels == 3) return tex;
  if (tex.channels < 3) throw std::invalid_argument("expected a texture with >= 3 channels");
  return tex.channel_slice(0, 3);
}

// Opacity in (0,1) from a tanh-output node.
int to_unit(ad::Tape& t, int node) { return t.add_scalar(t.scale(node, 0.5), 0.5); }

// Foreground mapping alone (evaluate_mappings would also run the other nets).
Tensor source_fg_uv(const AtlasModel& model, const Tensor& norm_pts) {
  return model.map_fg.forward(positional_encode(norm_pts, model.cfg.pos_freqs));
}

// Mean squared residual node: sum((a - target)^2) / rows.
int mse_node(ad::Tape& t, int a, int target_const) {
  const int d = t.sub(a, target_const);
  return t.scale(t.reduce_sum(t.mul(d, d)), 1.0 / t.rows(a));
}

// Whole-frame fallback window when a frame shows no object.
CropSpec full_frame_spec(int w, int h, int out_size) {
  CropSpec spec;
  spec.side = std::min(w, h);
  spec.x0 = (w - spec.side) / 2;
  spec.y0 = (h - spec.side) / 2;
  spec.src_w = w;
  spec.src_h = h;
  spec.out_size = out_size;
  return spec;
}

std::vector<CropSpec> object_windows(const AtlasModel& model, int out_size) {
  std::vector<CropSpec> crops;
  for (const Image& a : render_alpha(model)) {
    try {
      crops.push_back(compute_crop_spec(a, out_size, 0.5, 1.4));
    } catch (const std::invalid_argument&) {
      crops.push_back(full_frame_spec(a.w, a.h, out_size));
    }
  }
  return crops;
}

PixelPoint sample_point(Rng& rng, const VideoDims& d, const std::vector<CropSpec>& crops,
                        double crop_fraction) {
  PixelPoint p;
  p.k = static_cast<int>(rng.uniform_int(0, d.frames - 1));
  if (rng.uniform() < crop_fraction) {
    const CropSpec& c = crops[p.k];
    p.x = c.x0 + rng.uniform() * c.side - 0.5;
    p.y = c.y0 + rng.uniform() * c.side - 0.5;
  } else {
    p.x = rng.uniform() * d.width - 0.5;
    p.y = rng.uniform() * d.height - 0.5;
  }
  return p;
}

PixelPoint offset_point(const PixelPoint& p, double delta, const VideoDims& d) {
  PixelPoint q = p;
  q.x = std::min(p.x + delta, d.width - 0.5);
  q.y = std::min(p.y + delta, d.height - 0.5);
  return q;
}

}  // namespace

EditMappingNetworks EditMappingNetworks::make(const AtlasModelConfig& cfg, const VideoDims& dims,
                                              Rng& rng) {
  EditMappingNetworks n;
  n.cfg = cfg;
  n.dims = dims;
  const int in3 = encoded_width(3, cfg.pos_freqs);
  const std::vector<int> hidden(cfg.depth, cfg.hidden);
  n.map = MlpNetwork::make(in3, hidden, 2, OutputActivation::Tanh, rng);
  n.alpha = MlpNetwork::make(in3, hidden, 1, OutputActivation::Tanh, rng);
  return n;
}

std::vector<Tensor*> EditMappingNetworks::params() {
  std::vector<Tensor*> out = map.params();
  for (Tensor* t : alpha.params()) out.push_back(t);
  return out;
}

void EditMappingNetworks::add_to_checkpoint(Checkpoint& ckpt) const {
  ckpt.add_network("edit.map", map);
  ckpt.add_network("edit.alpha", alpha);
  ckpt.meta["edit.pos_freqs"] = std::to_string(cfg.pos_freqs);
  ckpt.meta["edit.hidden"] = std::to_string(cfg.hidden);
  ckpt.meta["edit.depth"] = std::to_string(cfg.depth);
  ckpt.meta["edit.width"] = std::to_string(dims.width);
  ckpt.meta["edit.height"] = std::to_string(dims.height);
  ckpt.meta["edit.frames"] = std::to_string(dims.frames);
}

EditMappingNetworks EditMappingNetworks::from_checkpoint(const Checkpoint& ckpt) {
  EditMappingNetworks n;
  n.cfg.pos_freqs = std::stoi(ckpt.meta.at("edit.pos_freqs"));
  n.cfg.hidden = std::stoi(ckpt.meta.at("edit.hidden"));
  n.cfg.depth = std::stoi(ckpt.meta.at("edit.depth"));
  n.dims.width = std::stoi(ckpt.meta.at("edit.width"));
  n.dims.height = std::stoi(ckpt.meta.at("edit.height"));
  n.dims.frames = std::stoi(ckpt.meta.at("edit.frames"));
  n.map = ckpt.network("edit.map");
  n.alpha = ckpt.network("edit.alpha");
  return n;
}

EditBatch make_edit_batch(const AtlasModel& model, const AtlasTexture& edited_fg_rgb,
                          const AtlasTexture& edited_bg, const AtlasTexture& mask,
                          const std::vector<PixelPoint>& pts, double delta_local,
                          double delta_global) {
  if (edited_fg_rgb.channels != 3 || edited_bg.channels != 3 || mask.channels != 1) {
    throw std::invalid_argument("make_edit_batch: expected rgb fg, rgb bg, 1ch mask");
  }
  const int m = static_cast<int>(pts.size());
  std::vector<PixelPoint> pl(pts), pg(pts);
  for (int i = 0; i < m; ++i) {
    pl[i] = offset_point(pts[i], delta_local, model.dims);
    pg[i] = offset_point(pts[i], delta_global, model.dims);
  }
  const Tensor norm_p = normalized_points(pts, model.dims);
  const Tensor norm_pl = normalized_points(pl, model.dims);
  const Tensor norm_pg = normalized_points(pg, model.dims);

  EditBatch b;
  b.enc_p = positional_encode(norm_p, model.cfg.pos_freqs);
  b.enc_pl = positional_encode(norm_pl, model.cfg.pos_freqs);
  b.enc_pg = positional_encode(norm_pg, model.cfg.pos_freqs);

  const MappingEval ev = evaluate_mappings(model, norm_p);
  const Tensor uv_fg_l = source_fg_uv(model, norm_pl);
  const Tensor uv_fg_g = source_fg_uv(model, norm_pg);

  b.target_rgb = Tensor(m, 3);
  b.target_alpha = Tensor(m, 1);
  b.bg_rgb = Tensor(m, 3);
  b.off_local = Tensor(m, 2);
  b.off_global = Tensor(m, 2);
  for (int i = 0; i < m; ++i) {
    const double fu = ev.uv_fg.at(i, 0), fv = ev.uv_fg.at(i, 1);
    const BilinearSample fg = bilinear_sample(edited_fg_rgb, fu, fv);
    const BilinearSample bg = bilinear_sample(edited_bg, ev.uv_bg.at(i, 0), ev.uv_bg.at(i, 1));
    const double a = clamp01(bilinear_sample(mask, fu, fv).value[0]);
    b.target_alpha.at(i, 0) = a;
    for (int c = 0; c < 3; ++c) {
      b.bg_rgb.at(i, c) = bg.value[c];
      b.target_rgb.at(i, c) = (1.0 - a) * bg.value[c] + a * fg.value[c];
    }
    b.off_local.at(i, 0) = fu - uv_fg_l.at(i, 0);
    b.off_local.at(i, 1) = fv - uv_fg_l.at(i, 1);
    b.off_global.at(i, 0) = fu - uv_fg_g.at(i, 0);
    b.off_global.at(i, 1) = fv - uv_fg_g.at(i, 1);
  }
  return b;
}

EditLossNodes build_edit_loss(ad::Tape& tape, EditMappingNetworks& nets,
                              const AtlasTexture& edited_fg_rgb, const EditBatch& batch,
                              const LossWeights& w) {
  if (w.rgb < 0.0 || w.alpha < 0.0 || w.offset < 0.0 || w.offset_global < 0.0) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
  EditLossNodes n;
  n.map_p = nets.map.build(tape, tape.constant(batch.enc_p));
  n.map_pl = nets.map.build(tape, tape.constant(batch.enc_pl));
  n.map_pg = nets.map.build(tape, tape.constant(batch.enc_pg));
  n.alpha_p = nets.alpha.build(tape, tape.constant(batch.enc_p));
  n.alpha_unit = to_unit(tape, n.alpha_p.out);

  // Edited render: (1 - a) * bg + a * fg[M(p)].
  const int c_fg = tape.gather(&edited_fg_rgb, n.map_p.out);
  const int one_minus_a = tape.add_scalar(tape.scale(n.alpha_unit, -1.0), 1.0);
  n.render = tape.add(tape.mul_col(c_fg, n.alpha_unit),
                      tape.mul_col(tape.constant(batch.bg_rgb), one_minus_a));

  n.loss_rgb = mse_node(tape, n.render, tape.constant(batch.target_rgb));
  n.loss_alpha = mse_node(tape, n.alpha_unit, tape.constant(batch.target_alpha));
  n.loss_off_local =
      mse_node(tape, tape.sub(n.map_p.out, n.map_pl.out), tape.constant(batch.off_local));
  n.loss_off_global =
      mse_node(tape, tape.sub(n.map_p.out, n.map_pg.out), tape.constant(batch.off_global));

  n.total = tape.add(tape.add(tape.scale(n.loss_rgb, w.rgb), tape.scale(n.loss_alpha, w.alpha)),
                     tape.add(tape.scale(n.loss_off_local, w.offset),
                              tape.scale(n.loss_off_global, w.offset_global)));
  return n;
}

Tensor sds_pixel_gradient(const Tensor& v_hat, const Tensor& eps, const Tensor& zt, int level,
                          const NoiseSchedule& sched) {
  if (!v_hat.same_shape(eps) || !v_hat.same_shape(zt))
    throw std::invalid_argument("sds_pixel_gradient: shape mismatch");
  const Tensor eps_hat = eps_from_v(v_hat, zt, level, sched);
  const double w = 1.0 - sched.abar_at(level);
  Tensor g(v_hat.rows, v_hat.cols);
  for (std::size_t i = 0; i < g.d.size(); ++i) g.d[i] = w * (eps_hat.d[i] - eps.d[i]);
  return g;
}

double offset_loss_value(const Tensor& uv_p, const Tensor& uv_po, const Tensor& off_target) {
  if (!uv_p.same_shape(uv_po) || !uv_p.same_shape(off_target))
    throw std::invalid_argument("offset_loss_value: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < uv_p.d.size(); ++i) {
    const double r = (uv_p.d[i] - uv_po.d[i]) - off_target.d[i];
    acc += r * r;
  }
  return acc / uv_p.rows;
}

void identity_pretrain(EditMappingNetworks& nets, const AtlasModel& model,
                       const AtlasTexture& mask, int iters, double lr, Rng& rng) {
  if (iters <= 0) return;
  if (mask.channels != 1) throw std::invalid_argument("identity_pretrain: mask must be 1ch");
  const int batch = 1024;
  AdamConfig acfg;
  acfg.lr = lr;
  AdamOptimizer opt(nets.params(), acfg);
  GradBuffers grads = GradBuffers::like(nets.params());
  const std::size_t map_params = nets.map.params().size();
  ad::Tape tape;
  std::vector<PixelPoint> pts(batch);

  for (int it = 0; it < iters; ++it) {
    for (PixelPoint& p : pts) {
      p.k = static_cast<int>(rng.uniform_int(0, model.dims.frames - 1));
      p.x = rng.uniform() * model.dims.width - 0.5;
      p.y = rng.uniform() * model.dims.height - 0.5;
    }
    const Tensor norm = normalized_points(pts, model.dims);
    Tensor target_xy(batch, 2);
    for (int i = 0; i < batch; ++i) {
      target_xy.at(i, 0) = norm.at(i, 0);
      target_xy.at(i, 1) = norm.at(i, 1);
    }
    const Tensor uv_fg = source_fg_uv(model, norm);
    Tensor target_a(batch, 1);
    for (int i = 0; i < batch; ++i) {
      target_a.at(i, 0) = clamp01(bilinear_sample(mask, uv_fg.at(i, 0), uv_fg.at(i, 1)).value[0]);
    }

    tape.clear();
    const int enc = tape.constant(positional_encode(norm, model.cfg.pos_freqs));
    MlpNetwork::TapeBind mb = nets.map.build(tape, enc);
    MlpNetwork::TapeBind ab = nets.alpha.build(tape, enc);
    const int loss = tape.add(mse_node(tape, mb.out, tape.constant(target_xy)),
                              mse_node(tape, to_unit(tape, ab.out), tape.constant(target_a)));
    tape.backward(loss);
    grads.zero();
    nets.map.accumulate_grads(tape, mb, grads.g, 0);
    nets.alpha.accumulate_grads(tape, ab, grads.g, map_params);
    opt.step(grads);
  }
}

UvOptimizeResult optimize_uv_mappings(const AtlasModel& model, const AtlasTexture& edited_fg,
                                      const AtlasTexture& edited_bg, const AtlasTexture& mask,
                                      const UvOptimizeConfig& cfg, const SdsSetup* sds) {
  if (cfg.batch <= 0 || cfg.iterations < 0 || cfg.sds_iterations < 0) {
    throw std::invalid_argument("optimize_uv_mappings: counts must be nonnegative");
  }
  if (cfg.crop_fraction < 0.0 || cfg.crop_fraction > 1.0) {
    throw std::invalid_argument("optimize_uv_mappings: crop_fraction must lie in [0,1]");
  }
  if (sds && (!sds->net || !sds->sched)) {
    throw std::invalid_argument("optimize_uv_mappings: incomplete sds setup");
  }
  const AtlasTexture fg_rgb = rgb_view(edited_fg);
  const AtlasTexture bg_rgb = rgb_view(edited_bg);

  Rng rng(cfg.seed);
  Rng init_rng = rng.fork(1);
  Rng pre_rng = rng.fork(2);
  Rng batch_rng = rng.fork(3);
  Rng sds_rng = rng.fork(4);

  UvOptimizeResult res;
  res.nets = EditMappingNetworks::make(model.cfg, model.dims, init_rng);
  identity_pretrain(res.nets, model, mask, cfg.pretrain_iters, cfg.pretrain_lr, pre_rng);

  const int window_res = sds ? sds->net->cfg.image_size : 32;
  const std::vector<CropSpec> crops = object_windows(model, window_res);

  AdamConfig acfg;
  acfg.lr = cfg.lr;
  AdamOptimizer opt(res.nets.params(), acfg);
  GradBuffers grads = GradBuffers::like(res.nets.params());
  const std::size_t map_params = res.nets.map.params().size();

  ad::Tape tape, sds_tape;
  std::vector<PixelPoint> pts(cfg.batch);
  const int total_iters = cfg.iterations + cfg.sds_iterations;

  for (int it = 0; it < total_iters; ++it) {
    for (PixelPoint& p : pts) p = sample_point(batch_rng, model.dims, crops, cfg.crop_fraction);
    const EditBatch batch =
        make_edit_batch(model, fg_rgb, bg_rgb, mask, pts, cfg.delta_local, cfg.delta_global);

    tape.clear();
    EditLossNodes nodes = build_edit_loss(tape, res.nets, fg_rgb, batch, cfg.weights);
    const double total = tape.scalar_value(nodes.total);
    if (!std::isfinite(total)) throw DivergenceError("optimize-uv", cfg.seed, it);

    tape.backward(nodes.total);
    grads.zero();
    res.nets.map.accumulate_grads(tape, nodes.map_p, grads.g, 0);
    res.nets.map.accumulate_grads(tape, nodes.map_pl, grads.g, 0);
    res.nets.map.accumulate_grads(tape, nodes.map_pg, grads.g, 0);
    res.nets.alpha.accumulate_grads(tape, nodes.alpha_p, grads.g, map_params);

    double sds_metric = 0.0;
    if (sds && it >= cfg.iterations) {
      // Score injection: render one object window differentiably, noise it,
      // and push w(i) * (eps_hat - eps) straight back through the renderer
      // (the denoiser itself is frozen and not differentiated).
      const int k = static_cast<int>(sds_rng.uniform_int(0, model.dims.frames - 1));
      const CropSpec& win = crops[k];
      const int s = win.out_size;
      std::vector<PixelPoint> grid(static_cast<std::size_t>(s) * s);
      const double step = static_cast<double>(win.side) / s;
      for (int j = 0; j < s; ++j) {
        for (int i2 = 0; i2 < s; ++i2) {
          grid[static_cast<std::size_t>(j) * s + i2] = {win.x0 + (i2 + 0.5) * step - 0.5,
                                                        win.y0 + (j + 0.5) * step - 0.5, k};
        }
      }
      const EditBatch gb =
          make_edit_batch(model, fg_rgb, bg_rgb, mask, grid, cfg.delta_local, cfg.delta_global);
      sds_tape.clear();
      const int enc = sds_tape.constant(gb.enc_p);
      MlpNetwork::TapeBind mb = res.nets.map.build(sds_tape, enc);
      MlpNetwork::TapeBind ab = res.nets.alpha.build(sds_tape, enc);
      const int a_unit = to_unit(sds_tape, ab.out);
      const int c_fg = sds_tape.gather(&fg_rgb, mb.out);
      const int one_minus_a = sds_tape.add_scalar(sds_tape.scale(a_unit, -1.0), 1.0);
      const int render = sds_tape.add(sds_tape.mul_col(c_fg, a_unit),
                                      sds_tape.mul_col(sds_tape.constant(gb.bg_rgb), one_minus_a));

      const int dim = s * s * 3;
      Tensor z0(1, dim);
      const double* rv = sds_tape.value_data(render);
      for (int i2 = 0; i2 < dim; ++i2) z0.d[i2] = 2.0 * rv[i2] - 1.0;
      const int level = static_cast<int>(sds_rng.uniform_int(1, sds->sched->steps));
      Tensor eps(1, dim);
      for (double& v : eps.d) v = sds_rng.normal();
      const Tensor zt = add_noise(z0, eps, level, *sds->sched);
      const Tensor v_hat =
          predict_v_guided(*sds->net, zt, level, *sds->sched, sds->ctx, sds->cfg_scale);
      const Tensor g = sds_pixel_gradient(v_hat, eps, zt, level, *sds->sched);

      Tensor seed(s * s, 3);
      for (int i2 = 0; i2 < dim; ++i2) {
        seed.d[i2] = g.d[i2];
        sds_metric += g.d[i2] * g.d[i2];
      }
      sds_metric /= dim;
      sds_tape.backward(render, seed);
      res.nets.map.accumulate_grads(sds_tape, mb, grads.g, 0);
      res.nets.alpha.accumulate_grads(sds_tape, ab, grads.g, map_params);
    }

    if (!grads.all_finite()) throw DivergenceError("optimize-uv", cfg.seed, it);
    opt.step(grads);

    if (it % cfg.log_every == 0 || it + 1 == total_iters) {
      UvLossRow row;
      row.step = it;
      row.rgb = tape.scalar_value(nodes.loss_rgb);
      row.alpha = tape.scalar_value(nodes.loss_alpha);
      row.off_local = tape.scalar_value(nodes.loss_off_local);
      row.off_global = tape.scalar_value(nodes.loss_off_global);
      row.sds = sds_metric;
      row.total = total;
      res.losses.push_back(row);
    }
  }
  return res;
}

FrameSequence render_edited_video(const AtlasModel& model, const EditMappingNetworks& nets,
                                  const AtlasTexture& edited_fg, const AtlasTexture& edited_bg) {
  const AtlasTexture fg_rgb = rgb_view(edited_fg);
  const AtlasTexture bg_rgb = rgb_view(edited_bg);
  const VideoDims& d = model.dims;
  FrameSequence seq;
  std::vector<PixelPoint> pts(static_cast<std::size_t>(d.width) * d.height);
  for (int k = 0; k < d.frames; ++k) {
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        pts[static_cast<std::size_t>(y) * d.width + x] = {double(x), double(y), k};
      }
    }
    const Tensor norm = normalized_points(pts, d);
    const Tensor enc = positional_encode(norm, model.cfg.pos_freqs);
    const Tensor uv_edit = nets.map.forward(enc);
    const Tensor a_raw = nets.alpha.forward(enc);
    const Tensor uv_bg = model.map_bg.forward(enc);
    Image frame(d.width, d.height, 3);
    for (int i = 0; i < uv_edit.rows; ++i) {
      const BilinearSample fg = bilinear_sample(fg_rgb, uv_edit.at(i, 0), uv_edit.at(i, 1));
      const BilinearSample bg = bilinear_sample(bg_rgb, uv_bg.at(i, 0), uv_bg.at(i, 1));
      const double a = 0.5 * (a_raw.at(i, 0) + 1.0);
      for (int c = 0; c < 3; ++c) {
        frame.px[static_cast<std::size_t>(i) * 3 + c] =
            (1.0 - a) * bg.value[c] + a * fg.value[c];
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

Tensor edit_mapping_uv(const EditMappingNetworks& nets, const Tensor& norm_pts) {
  return nets.map.forward(positional_encode(norm_pts, nets.cfg.pos_freqs));
}

}  // namespace vatlas
