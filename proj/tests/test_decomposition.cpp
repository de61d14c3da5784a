#include <cmath>
#include <vector>

#include <doctest.h>

#include "vatlas/atlas_model.hpp"
#include "vatlas/decomposition.hpp"
#include "vatlas/encoding.hpp"
#include "vatlas/rng.hpp"
#include "vatlas/synth.hpp"

using namespace vatlas;

namespace {

AtlasModelConfig tiny_model_config() {
  AtlasModelConfig cfg;
  cfg.pos_freqs = 4;
  cfg.hidden = 32;
  cfg.depth = 2;
  return cfg;
}

SyntheticScene tiny_scene() {
  SyntheticScene s;
  s.width = 24;
  s.height = 16;
  s.frames = 3;
  s.sprite_size = 8;
  s.motion = MotionKind::Linear;
  s.vel_x = 1.0;
  s.vel_y = 0.0;
  return s;
}

}  // namespace

TEST_CASE("point normalization hits the documented endpoints") {
  VideoDims dims{96, 54, 12};
  std::vector<PixelPoint> pts = {{0.0, 0.0, 0}, {95.0, 53.0, 11}, {47.5, 26.5, 5}};
  Tensor n = normalized_points(pts, dims);
  CHECK(n.at(0, 0) == doctest::Approx(2.0 * 0.5 / 96.0 - 1.0).epsilon(1e-15));
  CHECK(n.at(0, 1) == doctest::Approx(2.0 * 0.5 / 54.0 - 1.0).epsilon(1e-15));
  CHECK(n.at(0, 2) == -1.0);
  CHECK(n.at(1, 0) == doctest::Approx(2.0 * 95.5 / 96.0 - 1.0).epsilon(1e-15));
  CHECK(n.at(1, 2) == 1.0);
  CHECK(n.at(2, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.at(2, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("half-plane folding separates the layers along u") {
  Tensor uv(2, 2);
  uv.at(0, 0) = 0.0;
  uv.at(0, 1) = 0.5;
  uv.at(1, 0) = 0.8;
  uv.at(1, 1) = -0.2;
  Tensor fg = uv;
  to_half_plane(fg, AtlasLayer::Foreground);
  CHECK(fg.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(fg.at(1, 0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(fg.at(0, 1) == 0.5);  // v untouched
  Tensor bg = uv;
  to_half_plane(bg, AtlasLayer::Background);
  CHECK(bg.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(bg.at(1, 0) == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(bg.at(0, 0) < 0.0);
  CHECK(fg.at(0, 0) > 0.0);
}

TEST_CASE("mapping outputs live in the open boxes the blend expects") {
  Rng rng(81);
  AtlasModel model = AtlasModel::make(tiny_model_config(), {24, 16, 3}, rng);
  std::vector<PixelPoint> pts;
  for (int i = 0; i < 50; ++i)
    pts.push_back({rng.uniform() * 24.0, rng.uniform() * 16.0, int(rng.uniform_int(0, 2))});
  MappingEval ev = evaluate_mappings(model, normalized_points(pts, model.dims));
  for (int i = 0; i < ev.uv_bg.rows; ++i) {
    for (int c = 0; c < 2; ++c) {
      CHECK(std::abs(ev.uv_bg.at(i, c)) < 1.0);
      CHECK(std::abs(ev.uv_fg.at(i, c)) < 1.0);
    }
    CHECK(ev.alpha.at(i, 0) > 0.0);
    CHECK(ev.alpha.at(i, 0) < 1.0);
  }
}

TEST_CASE("per-pixel reconstruction is the documented blend") {
  Rng rng(82);
  AtlasModel model = AtlasModel::make(tiny_model_config(), {24, 16, 3}, rng);
  std::vector<PixelPoint> pts;
  for (int i = 0; i < 20; ++i)
    pts.push_back({rng.uniform() * 24.0, rng.uniform() * 16.0, int(rng.uniform_int(0, 2))});
  const Tensor norm = normalized_points(pts, model.dims);
  const MappingEval ev = evaluate_mappings(model, norm);
  const Tensor cb = atlas_colors(model, ev.uv_bg, AtlasLayer::Background);
  const Tensor cf = atlas_colors(model, ev.uv_fg, AtlasLayer::Foreground);
  const Tensor rec = reconstruct_pixels(model, norm);
  for (int i = 0; i < rec.rows; ++i) {
    const double a = ev.alpha.at(i, 0);
    for (int c = 0; c < 3; ++c)
      CHECK(rec.at(i, c) ==
            doctest::Approx((1.0 - a) * cb.at(i, c) + a * cf.at(i, c)).epsilon(1e-12));
  }
}

TEST_CASE("atlas model checkpoints round trip") {
  Rng rng(83);
  AtlasModel model = AtlasModel::make(tiny_model_config(), {24, 16, 3}, rng);
  Checkpoint ckpt;
  model.add_to_checkpoint(ckpt);
  AtlasModel back = AtlasModel::from_checkpoint(ckpt);
  CHECK(back.dims.width == 24);
  CHECK(back.dims.height == 16);
  CHECK(back.dims.frames == 3);
  CHECK(back.cfg.pos_freqs == model.cfg.pos_freqs);
  REQUIRE(back.map_fg.layers.size() == model.map_fg.layers.size());
  for (std::size_t l = 0; l < model.map_fg.layers.size(); ++l)
    CHECK(back.map_fg.layers[l].w.d == model.map_fg.layers[l].w.d);
  CHECK(back.atlas.layers[0].w.d == model.atlas.layers[0].w.d);
}

TEST_CASE("foreground atlas keeps alpha 0 where no frame ever lands") {
  Rng rng(84);
  AtlasModel model = AtlasModel::make(tiny_model_config(), {24, 16, 3}, rng);
  AtlasTexture fg = discretize_atlas(model, AtlasLayer::Foreground, 32);
  REQUIRE(fg.channels == 4);
  int touched = 0;
  for (int j = 0; j < fg.size; ++j)
    for (int i = 0; i < fg.size; ++i)
      if (fg.at(j, i, 3) > 0.0) ++touched;
  CHECK(touched > 0);
  CHECK(touched < fg.size * fg.size);  // splatting reaches only mapped uv cells

  AtlasTexture bg = discretize_atlas(model, AtlasLayer::Background, 32);
  CHECK(bg.channels == 3);
}

TEST_CASE("a short decomposition run is stable and reduces its loss") {
  auto [video, gt] = generate_synthetic_video(tiny_scene());
  DecompositionConfig cfg;
  cfg.model = tiny_model_config();
  cfg.iterations = 120;
  cfg.batch = 256;
  cfg.pretrain_iterations = 60;
  cfg.log_every = 10;
  cfg.seed = 3;

  DecompositionResult res = train_decomposition(video.frames, gt.alphas, cfg);
  REQUIRE(res.losses.size() >= 5);
  CHECK(res.losses.back().total < res.losses.front().total);
  for (const auto& row : res.losses) {
    CHECK(std::isfinite(row.total));
    CHECK(row.rgb >= 0.0);
    CHECK(row.alpha >= 0.0);
    CHECK(row.temporal >= 0.0);
  }

  std::vector<Image> recon = render_reconstruction(res.model);
  REQUIRE(int(recon.size()) == 3);
  CHECK(recon[0].w == 24);
  CHECK(recon[0].h == 16);
  CHECK(recon[0].c == 3);
  std::vector<Image> alpha = render_alpha(res.model);
  CHECK(alpha[0].c == 1);
}

TEST_CASE("mismatched masks are rejected") {
  auto [video, gt] = generate_synthetic_video(tiny_scene());
  DecompositionConfig cfg;
  cfg.model = tiny_model_config();
  std::vector<Image> bad_masks(gt.alphas.begin(), gt.alphas.end() - 1);
  CHECK_THROWS_AS(train_decomposition(video.frames, bad_masks, cfg), std::invalid_argument);
}
