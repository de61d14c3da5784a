#include "vatlas/editing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vatlas {
namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Window -> crop coordinate transform shared by crop_window and uncrop so the
// pair stays an exact inverse at out_size == side.
double to_crop_coord(double src_coord, int origin, int side, int out_size) {
  return (src_coord - origin) * static_cast<double>(out_size) / side;
}

}  // namespace

CropSpec compute_crop_spec(const Image& alpha, int out_size, double tau, double margin) {
  if (alpha.c != 1) throw std::invalid_argument("compute_crop_spec: alpha must be 1ch");
  if (out_size < 2) throw std::invalid_argument("compute_crop_spec: out_size must be >= 2");
  int xmin = alpha.w, xmax = -1, ymin = alpha.h, ymax = -1;
  for (int y = 0; y < alpha.h; ++y) {
    for (int x = 0; x < alpha.w; ++x) {
      if (alpha.at(y, x, 0) >= tau) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (xmax < 0) throw std::invalid_argument("compute_crop_spec: empty object mask");

  CropSpec spec;
  spec.src_w = alpha.w;
  spec.src_h = alpha.h;
  spec.out_size = out_size;
  const int bw = xmax - xmin + 1, bh = ymax - ymin + 1;
  int side = static_cast<int>(std::ceil(std::max(bw, bh) * margin));
  side = std::min(side, std::min(alpha.w, alpha.h));
  spec.side = std::max(side, 2);
  spec.x0 = (xmin + xmax + 1) / 2 - spec.side / 2;
  spec.y0 = (ymin + ymax + 1) / 2 - spec.side / 2;
  spec.x0 = std::min(std::max(spec.x0, 0), alpha.w - spec.side);
  spec.y0 = std::min(std::max(spec.y0, 0), alpha.h - spec.side);
  return spec;
}

Image crop_window(const Image& image, const CropSpec& spec) {
  if (image.w != spec.src_w || image.h != spec.src_h) {
    throw std::invalid_argument("crop_window: image does not match crop spec source size");
  }
  Image out(spec.out_size, spec.out_size, image.c);
  const double step = static_cast<double>(spec.side) / spec.out_size;
  double sample[4];
  for (int j = 0; j < spec.out_size; ++j) {
    for (int i = 0; i < spec.out_size; ++i) {
      const double sx = spec.x0 + (i + 0.5) * step;
      const double sy = spec.y0 + (j + 0.5) * step;
      image.sample_bilinear(sx, sy, sample);
      for (int c = 0; c < image.c; ++c) out.at(j, i, c) = sample[c];
    }
  }
  return out;
}

std::pair<Image, CropSpec> center_crop_object(const Image& image, const Image& alpha,
                                              int out_size, double tau, double margin) {
  if (image.w != alpha.w || image.h != alpha.h) {
    throw std::invalid_argument("center_crop_object: image/alpha size mismatch");
  }
  const CropSpec spec = compute_crop_spec(alpha, out_size, tau, margin);
  Image masked(image.w, image.h, image.c);
  for (int y = 0; y < image.h; ++y) {
    for (int x = 0; x < image.w; ++x) {
      const double a = alpha.at(y, x, 0);
      for (int c = 0; c < image.c; ++c) masked.at(y, x, c) = image.at(y, x, c) * a;
    }
  }
  return {crop_window(masked, spec), spec};
}

Image uncrop(const Image& crop, const CropSpec& spec) {
  if (crop.w != spec.out_size || crop.h != spec.out_size) {
    throw std::invalid_argument("uncrop: crop does not match spec out_size");
  }
  Image out(spec.src_w, spec.src_h, crop.c);
  double sample[4];
  for (int y = spec.y0; y < spec.y0 + spec.side; ++y) {
    for (int x = spec.x0; x < spec.x0 + spec.side; ++x) {
      const double cx = to_crop_coord(x + 0.5, spec.x0, spec.side, spec.out_size);
      const double cy = to_crop_coord(y + 0.5, spec.y0, spec.side, spec.out_size);
      crop.sample_bilinear(cx, cy, sample);
      for (int c = 0; c < crop.c; ++c) out.at(y, x, c) = sample[c];
    }
  }
  return out;
}

Image morphological_close(const Image& mask) {
  if (mask.c != 1) throw std::invalid_argument("morphological_close: mask must be 1ch");
  auto sweep = [](const Image& in, bool take_max) {
    Image out(in.w, in.h, 1);
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        double v = in.at(y, x, 0);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = std::min(std::max(x + dx, 0), in.w - 1);
            const int ny = std::min(std::max(y + dy, 0), in.h - 1);
            const double n = in.at(ny, nx, 0);
            v = take_max ? std::max(v, n) : std::min(v, n);
          }
        }
        out.at(y, x, 0) = v;
      }
    }
    return out;
  };
  return sweep(sweep(mask, true), false);
}

Image extract_mask(const Image& crop, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("extract_mask: need lo < hi");
  Image mask(crop.w, crop.h, 1);
  for (int y = 0; y < crop.h; ++y) {
    for (int x = 0; x < crop.w; ++x) {
      double lum = 0.0;
      for (int c = 0; c < crop.c; ++c) lum = std::max(lum, crop.at(y, x, c));
      const double t = clamp01((lum - lo) / (hi - lo));
      mask.at(y, x, 0) = t * t * (3.0 - 2.0 * t);
    }
  }
  return morphological_close(mask);
}

AtlasTexture paste_and_inpaint(const AtlasTexture& edited_fg, const AtlasTexture& source_fg,
                               const AtlasTexture& fg_mask) {
  if (edited_fg.size != source_fg.size || edited_fg.size != fg_mask.size) {
    throw std::invalid_argument("paste_and_inpaint: texture resolutions differ");
  }
  if (edited_fg.channels < 3 || source_fg.channels != 4 || fg_mask.channels != 1) {
    throw std::invalid_argument(
        "paste_and_inpaint: expected rgb(+) edit, rgba source, single-channel mask");
  }
  const int n = edited_fg.size;
  AtlasTexture out;
  out.size = n;
  out.channels = 4;
  out.texels.assign(static_cast<std::size_t>(n) * n * 4, 0.0);

  // Blend by mask; opacity keeps whatever the source decomposition saw
  // (shadows live there), raised to the mask where the edit adds coverage.
  std::vector<std::uint8_t> defined(static_cast<std::size_t>(n) * n, 1);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(j) * n + i;
      const double m = clamp01(fg_mask.texels[idx]);
      const double src_a = source_fg.texels[idx * 4 + 3];
      double* o = &out.texels[idx * 4];
      for (int c = 0; c < 3; ++c) {
        const double e = edited_fg.texels[idx * edited_fg.channels + c];
        const double s = source_fg.texels[idx * 4 + c];
        o[c] = clamp01(m * e + (1.0 - m) * s);
      }
      o[3] = clamp01(std::max(m, src_a));
      // Newly exposed but never observed: no source frame covered this texel
      // and the edit does not either, so its color is unconstrained.
      if (m < 0.5 && src_a <= 0.0) defined[idx] = 0;
    }
  }

  // Diffusion fill of undefined texels: repeated averaging over known
  // 4-neighbors. Every filled value is a convex combination of boundary
  // colors, so the fill obeys the maximum principle by construction.
  std::vector<std::uint8_t> known = defined;
  bool any_unknown = true;
  while (any_unknown) {
    any_unknown = false;
    bool grew = false;
    std::vector<std::uint8_t> next = known;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(j) * n + i;
        if (known[idx]) continue;
        double acc[3] = {0, 0, 0};
        int cnt = 0;
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int ni = i + dx[d], nj = j + dy[d];
          if (ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
          const std::size_t nidx = static_cast<std::size_t>(nj) * n + ni;
          if (!known[nidx]) continue;
          for (int c = 0; c < 3; ++c) acc[c] += out.texels[nidx * 4 + c];
          ++cnt;
        }
        if (cnt > 0) {
          for (int c = 0; c < 3; ++c) out.texels[idx * 4 + c] = acc[c] / cnt;
          next[idx] = 1;
          grew = true;
        } else {
          any_unknown = true;
        }
      }
    }
    known.swap(next);
    if (any_unknown && !grew) break;  // fully isolated region (whole-texture undefined)
  }

  // A few smoothing sweeps over the filled region even out fill-order seams.
  for (int pass = 0; pass < 8; ++pass) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(j) * n + i;
        if (defined[idx]) continue;
        double acc[3] = {0, 0, 0};
        int cnt = 0;
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int ni = i + dx[d], nj = j + dy[d];
          if (ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
          const std::size_t nidx = static_cast<std::size_t>(nj) * n + ni;
          if (!known[nidx]) continue;
          for (int c = 0; c < 3; ++c) acc[c] += out.texels[nidx * 4 + c];
          ++cnt;
        }
        if (cnt > 0) {
          for (int c = 0; c < 3; ++c) out.texels[idx * 4 + c] = acc[c] / cnt;
        }
      }
    }
  }
  return out;
}

FrameSequence initial_edit_render(const AtlasModel& model, const AtlasTexture& edited_fg,
                                  const AtlasTexture& edited_bg, const AtlasTexture& alpha_mask) {
  if (alpha_mask.channels != 1) {
    throw std::invalid_argument("initial_edit_render: alpha mask must be single channel");
  }
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
    const MappingEval ev = evaluate_mappings(model, norm);
    Image frame(d.width, d.height, 3);
    for (int i = 0; i < ev.uv_fg.rows; ++i) {
      const BilinearSample fg = bilinear_sample(edited_fg, ev.uv_fg.at(i, 0), ev.uv_fg.at(i, 1));
      const BilinearSample bg = bilinear_sample(edited_bg, ev.uv_bg.at(i, 0), ev.uv_bg.at(i, 1));
      const BilinearSample am =
          bilinear_sample(alpha_mask, ev.uv_fg.at(i, 0), ev.uv_fg.at(i, 1));
      const double a = clamp01(am.value[0]);
      for (int c = 0; c < 3; ++c) {
        frame.px[static_cast<std::size_t>(i) * 3 + c] =
            (1.0 - a) * bg.value[c] + a * fg.value[c];
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

AtlasTexture edit_background_atlas(const DenoiserNetwork& net, const AtlasTexture& bg_tex,
                                   const ConditioningContext& ctx, double strength,
                                   const NoiseSchedule& sched, double cfg_scale,
                                   std::uint64_t seed) {
  if (!(strength > 0.0 && strength <= 1.0)) {
    throw std::invalid_argument("edit_background_atlas: strength must be in (0, 1]");
  }
  if (bg_tex.size != net.cfg.image_size || bg_tex.channels != net.cfg.channels) {
    throw std::invalid_argument(
        "edit_background_atlas: texture resolution must match the denoiser input");
  }
  const int t_edit = std::max(1, static_cast<int>(std::ceil(strength * sched.steps)));

  Tensor z0(1, net.data_width());
  for (std::size_t i = 0; i < bg_tex.texels.size(); ++i) z0.d[i] = 2.0 * bg_tex.texels[i] - 1.0;

  Rng rng(seed);
  Tensor eps(1, net.data_width());
  for (double& v : eps.d) v = rng.normal();

  LatentState state;
  state.z = add_noise(z0, eps, t_edit, sched);
  state.t = t_edit;
  const Tensor out = ddim_sample(net, state, ctx, sched, cfg_scale);

  AtlasTexture edited = bg_tex;
  for (std::size_t i = 0; i < edited.texels.size(); ++i) {
    edited.texels[i] = std::min(1.0, std::max(0.0, 0.5 * (out.d[i] + 1.0)));
  }
  return edited;
}

}  // namespace vatlas
