#include "vatlas/atlas_model.hpp"

#include <cmath>
#include <stdexcept>

#include "vatlas/encoding.hpp"
#include "vatlas/kernels.hpp"

namespace vatlas {

AtlasModel AtlasModel::make(const AtlasModelConfig& cfg, const VideoDims& dims, Rng& rng) {
  if (dims.width < 1 || dims.height < 1 || dims.frames < 1)
    throw std::invalid_argument("AtlasModel: bad video dimensions");
  AtlasModel m;
  m.cfg = cfg;
  m.dims = dims;
  const std::vector<int> hidden(std::size_t(cfg.depth), cfg.hidden);
  const int in3 = encoded_width(3, cfg.pos_freqs);
  const int in2 = encoded_width(2, cfg.pos_freqs);
  m.map_bg = MlpNetwork::make(in3, hidden, 2, OutputActivation::Tanh, rng);
  m.map_fg = MlpNetwork::make(in3, hidden, 2, OutputActivation::Tanh, rng);
  m.alpha = MlpNetwork::make(in3, hidden, 1, OutputActivation::Tanh, rng);
  m.atlas = MlpNetwork::make(in2, hidden, 3, OutputActivation::Tanh, rng);
  return m;
}

void AtlasModel::add_to_checkpoint(Checkpoint& ckpt) const {
  ckpt.add_network("map_bg", map_bg);
  ckpt.add_network("map_fg", map_fg);
  ckpt.add_network("alpha", alpha);
  ckpt.add_network("atlas", atlas);
  ckpt.meta["atlas_model.pos_freqs"] = std::to_string(cfg.pos_freqs);
  ckpt.meta["atlas_model.hidden"] = std::to_string(cfg.hidden);
  ckpt.meta["atlas_model.depth"] = std::to_string(cfg.depth);
  ckpt.meta["atlas_model.width"] = std::to_string(dims.width);
  ckpt.meta["atlas_model.height"] = std::to_string(dims.height);
  ckpt.meta["atlas_model.frames"] = std::to_string(dims.frames);
}

AtlasModel AtlasModel::from_checkpoint(const Checkpoint& ckpt) {
  auto meta_int = [&](const std::string& key) {
    const auto it = ckpt.meta.find("atlas_model." + key);
    if (it == ckpt.meta.end()) throw std::runtime_error("checkpoint: missing atlas meta " + key);
    return std::stoi(it->second);
  };
  AtlasModel m;
  m.cfg.pos_freqs = meta_int("pos_freqs");
  m.cfg.hidden = meta_int("hidden");
  m.cfg.depth = meta_int("depth");
  m.dims = {meta_int("width"), meta_int("height"), meta_int("frames")};
  m.map_bg = ckpt.network("map_bg");
  m.map_fg = ckpt.network("map_fg");
  m.alpha = ckpt.network("alpha");
  m.atlas = ckpt.network("atlas");
  return m;
}

Tensor normalized_points(const std::vector<PixelPoint>& pts, const VideoDims& dims) {
  Tensor out(int(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.d[3 * i] = 2.0 * (pts[i].x + 0.5) / dims.width - 1.0;
    out.d[3 * i + 1] = 2.0 * (pts[i].y + 0.5) / dims.height - 1.0;
    out.d[3 * i + 2] = dims.frames > 1 ? 2.0 * pts[i].k / double(dims.frames - 1) - 1.0 : 0.0;
  }
  return out;
}

void to_half_plane(Tensor& uv, AtlasLayer layer) {
  if (uv.cols != 2) throw std::invalid_argument("to_half_plane: uv must be m x 2");
  const double off = layer == AtlasLayer::Foreground ? 0.5 : -0.5;
  for (int r = 0; r < uv.rows; ++r) uv.at(r, 0) = uv.at(r, 0) * 0.5 + off;
}

namespace {

Tensor scaled_shifted(const Tensor& t, double s, double off) {
  Tensor out(t.rows, t.cols);
  kern::scale(t.data(), s, out.data(), out.size());
  kern::add_scalar(out.data(), off, out.data(), out.size());
  return out;
}

}  // namespace

MappingEval evaluate_mappings(const AtlasModel& model, const Tensor& norm_pts) {
  const Tensor enc = positional_encode(norm_pts, model.cfg.pos_freqs);
  MappingEval out;
  out.uv_bg = model.map_bg.forward(enc);
  out.uv_fg = model.map_fg.forward(enc);
  out.alpha = scaled_shifted(model.alpha.forward(enc), 0.5, 0.5);
  return out;
}

Tensor atlas_colors(const AtlasModel& model, const Tensor& uv_local, AtlasLayer layer) {
  Tensor uv = uv_local;
  to_half_plane(uv, layer);
  const Tensor enc = positional_encode(uv, model.cfg.pos_freqs);
  return scaled_shifted(model.atlas.forward(enc), 0.5, 0.5);
}

Tensor reconstruct_pixels(const AtlasModel& model, const Tensor& norm_pts) {
  const MappingEval ev = evaluate_mappings(model, norm_pts);
  const Tensor c_bg = atlas_colors(model, ev.uv_bg, AtlasLayer::Background);
  const Tensor c_fg = atlas_colors(model, ev.uv_fg, AtlasLayer::Foreground);
  Tensor out(c_bg.rows, 3);
  for (int r = 0; r < out.rows; ++r) {
    const double a = ev.alpha.d[r];
    for (int c = 0; c < 3; ++c)
      out.at(r, c) = (1.0 - a) * c_bg.at(r, c) + a * c_fg.at(r, c);
  }
  return out;
}

namespace {

std::vector<PixelPoint> frame_points(const VideoDims& dims, int k) {
  std::vector<PixelPoint> pts;
  pts.reserve(std::size_t(dims.width) * dims.height);
  for (int y = 0; y < dims.height; ++y)
    for (int x = 0; x < dims.width; ++x) pts.push_back({double(x), double(y), k});
  return pts;
}

}  // namespace

std::vector<Image> render_reconstruction(const AtlasModel& model) {
  std::vector<Image> frames;
  for (int k = 0; k < model.dims.frames; ++k) {
    const Tensor rgb = reconstruct_pixels(model, normalized_points(frame_points(model.dims, k),
                                                                   model.dims));
    Image img(model.dims.width, model.dims.height, 3);
    for (std::size_t i = 0; i < img.px.size(); ++i) img.px[i] = rgb.d[i];
    frames.push_back(std::move(img));
  }
  return frames;
}

std::vector<Image> render_alpha(const AtlasModel& model) {
  std::vector<Image> frames;
  for (int k = 0; k < model.dims.frames; ++k) {
    const Tensor enc = positional_encode(
        normalized_points(frame_points(model.dims, k), model.dims), model.cfg.pos_freqs);
    const Tensor a = scaled_shifted(model.alpha.forward(enc), 0.5, 0.5);
    Image img(model.dims.width, model.dims.height, 1);
    for (std::size_t i = 0; i < img.px.size(); ++i) img.px[i] = a.d[i];
    frames.push_back(std::move(img));
  }
  return frames;
}

AtlasTexture discretize_atlas(const AtlasModel& model, AtlasLayer layer, int size) {
  const bool fg = layer == AtlasLayer::Foreground;
  AtlasTexture tex(size, fg ? 4 : 3);

  // Color plane: shared atlas evaluated at texel-center uv.
  Tensor uv(size * size, 2);
  for (int j = 0; j < size; ++j)
    for (int i = 0; i < size; ++i) {
      uv.at(j * size + i, 0) = tex.texel_u(i);
      uv.at(j * size + i, 1) = tex.texel_v(j);
    }
  const Tensor rgb = atlas_colors(model, uv, layer);
  for (int j = 0; j < size; ++j)
    for (int i = 0; i < size; ++i)
      for (int c = 0; c < 3; ++c) tex.at(j, i, c) = rgb.at(j * size + i, c);
  if (!fg) return tex;

  // Alpha plane: max-splat per-pixel opacity into the four texels around the
  // mapped uv of every video pixel.
  for (int k = 0; k < model.dims.frames; ++k) {
    const MappingEval ev = evaluate_mappings(
        model, normalized_points(frame_points(model.dims, k), model.dims));
    for (int r = 0; r < ev.uv_fg.rows; ++r) {
      const double su = (ev.uv_fg.at(r, 0) - tex.u0) / (tex.u1 - tex.u0) * size - 0.5;
      const double sv = (ev.uv_fg.at(r, 1) - tex.v0) / (tex.v1 - tex.v0) * size - 0.5;
      const int i0 = int(std::floor(su));
      const int j0 = int(std::floor(sv));
      const double a = ev.alpha.d[r];
      for (int dj = 0; dj <= 1; ++dj)
        for (int di = 0; di <= 1; ++di) {
          const int i = i0 + di, j = j0 + dj;
          if (i < 0 || i >= size || j < 0 || j >= size) continue;
          tex.at(j, i, 3) = std::max(tex.at(j, i, 3), a);
        }
    }
  }
  return tex;
}

}  // namespace vatlas
