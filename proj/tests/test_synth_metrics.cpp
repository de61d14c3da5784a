#include <cmath>
#include <vector>

#include <doctest.h>

#include "vatlas/metrics.hpp"
#include "vatlas/rng.hpp"
#include "vatlas/synth.hpp"

using namespace vatlas;

namespace {

SyntheticScene small_scene() {
  SyntheticScene s;
  s.width = 48;
  s.height = 32;
  s.frames = 5;
  s.sprite_size = 12;
  s.motion = MotionKind::Linear;
  s.vel_x = 1.0;
  s.vel_y = 0.0;
  s.orbit_rx = 0.0;
  s.orbit_ry = 0.0;
  return s;
}

Tensor random_uv(Rng& rng, int m) {
  Tensor t(m, 2);
  for (double& v : t.d) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("rendering is deterministic and rerenderable from ground truth") {
  SyntheticScene s = small_scene();
  auto [va, gta] = generate_synthetic_video(s);
  auto [vb, gtb] = generate_synthetic_video(s);
  REQUIRE(va.frames.size() == vb.frames.size());
  for (std::size_t k = 0; k < va.frames.size(); ++k) CHECK(va.frames[k].px == vb.frames[k].px);
  CHECK(gta.sprite.px == gtb.sprite.px);

  FrameSequence again = rerender_from_ground_truth(gta);
  REQUIRE(again.frames.size() == va.frames.size());
  for (std::size_t k = 0; k < va.frames.size(); ++k) CHECK(again.frames[k].px == va.frames[k].px);
}

TEST_CASE("ground truth is shaped and bounded as documented") {
  auto [video, gt] = generate_synthetic_video(small_scene());
  const SyntheticScene& s = gt.scene;
  REQUIRE(int(video.frames.size()) == s.frames);
  REQUIRE(int(gt.alphas.size()) == s.frames);
  REQUIRE(int(gt.uv.size()) == s.frames);
  REQUIRE(int(gt.flow_back.size()) == s.frames - 1);

  int fg_pixels = 0;
  for (int k = 0; k < s.frames; ++k) {
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        const double a = gt.alphas[k].at(y, x, 0);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        const double u = gt.uv[k].at(y, x, 0);
        const double v = gt.uv[k].at(y, x, 1);
        CHECK(std::abs(u) <= 1.0);
        CHECK(std::abs(v) <= 1.0);
        if (a == 0.0) {
          CHECK(u == 0.0);
          CHECK(v == 0.0);
        }
        if (a >= 0.5) ++fg_pixels;
      }
  }
  CHECK(fg_pixels > 50 * s.frames);  // the sprite is actually visible
}

TEST_CASE("integer linear motion produces integer backward flow on the sprite") {
  auto [video, gt] = generate_synthetic_video(small_scene());
  const SyntheticScene& s = gt.scene;
  for (int k = 0; k + 1 < s.frames; ++k) {
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        if (gt.alphas[k + 1].at(y, x, 0) < 0.5) continue;
        CHECK(gt.flow_back[k].at(y, x, 0) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(gt.flow_back[k].at(y, x, 1) == doctest::Approx(0.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("a sprite leaving the frame is rejected") {
  SyntheticScene s = small_scene();
  s.vel_x = 20.0;
  CHECK_THROWS_AS(generate_synthetic_video(s), std::invalid_argument);
}

TEST_CASE("background tiles depend only on the palette and pattern") {
  SyntheticScene s = small_scene();
  Image a = render_background_tile(s, 24);
  Image b = render_background_tile(s, 24);
  CHECK(a.px == b.px);
  CHECK(a.w == 24);
  CHECK(a.c == 3);
  s.bg_color_a = {0.9, 0.1, 0.1};
  Image c = render_background_tile(s, 24);
  CHECK(a.px != c.px);
}

TEST_CASE("psnr basics against a scalar oracle") {
  Image a(8, 6, 3), b(8, 6, 3);
  Rng rng(71);
  for (double& v : a.px) v = rng.uniform();
  CHECK(psnr(a, a) == 99.0);  // capped for identical frames

  for (std::size_t i = 0; i < b.px.size(); ++i) b.px[i] = 0.0;
  Image ones(8, 6, 3);
  for (double& v : ones.px) v = 1.0;
  CHECK(psnr(b, ones) == doctest::Approx(0.0).epsilon(1e-12));  // mse 1 -> 0 dB

  for (double& v : b.px) v = rng.uniform();
  double m = 0.0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const double d = a.px[i] - b.px[i];
    m += d * d;
  }
  m /= double(a.px.size());
  CHECK(mse(a, b) == doctest::Approx(m).epsilon(1e-13));
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / m)).epsilon(1e-12));

  Image small(4, 4, 3);
  CHECK_THROWS_AS(mse(a, small), std::invalid_argument);

  PsnrReport rep = psnr(std::vector<Image>{a, a}, std::vector<Image>{a, b});
  REQUIRE(rep.per_frame.size() == 2);
  CHECK(rep.per_frame[0] == 99.0);
  CHECK(rep.mean == doctest::Approx(0.5 * (99.0 + rep.per_frame[1])).epsilon(1e-12));
}

TEST_CASE("affine gauge fitting recovers planted transforms") {
  Rng rng(72);
  const Tensor gt = random_uv(rng, 600);
  const double A[4] = {1.3, -0.2, 0.4, 0.9};
  const double t[2] = {0.15, -0.3};
  Tensor pred(600, 2);
  for (int i = 0; i < 600; ++i) {
    pred.at(i, 0) = A[0] * gt.at(i, 0) + A[1] * gt.at(i, 1) + t[0];
    pred.at(i, 1) = A[2] * gt.at(i, 0) + A[3] * gt.at(i, 1) + t[1];
  }
  AffineFit fit = fit_affine_gauge(pred, gt);
  for (int i = 0; i < 4; ++i) CHECK(fit.a[i] == doctest::Approx(A[i]).epsilon(1e-9));
  CHECK(fit.t[0] == doctest::Approx(t[0]).epsilon(1e-9));
  CHECK(fit.t[1] == doctest::Approx(t[1]).epsilon(1e-9));

  UvErrorReport err = uv_error(pred, gt, 128);
  CHECK(err.mean_texels <= 1e-9);
  CHECK(err.max_texels <= 1e-8);
  CHECK(err.samples == 600);
}

TEST_CASE("uv error is invariant to affine reparameterizations of the prediction") {
  Rng rng(73);
  const Tensor gt = random_uv(rng, 400);
  Tensor pred = gt;
  for (double& v : pred.d) v += rng.uniform(-0.02, 0.02);  // imperfect mapping
  const UvErrorReport base = uv_error(pred, gt, 128);

  Tensor warped(400, 2);
  for (int i = 0; i < 400; ++i) {
    warped.at(i, 0) = 0.7 * pred.at(i, 0) - 0.3 * pred.at(i, 1) + 0.25;
    warped.at(i, 1) = 0.2 * pred.at(i, 0) + 1.1 * pred.at(i, 1) - 0.4;
  }
  const UvErrorReport re = uv_error(warped, gt, 128);
  CHECK(re.mean_texels == doctest::Approx(base.mean_texels).epsilon(1e-6));
}

TEST_CASE("uv error scales with planted noise in texel units") {
  Rng rng(74);
  const int m = 4000;
  const Tensor gt = random_uv(rng, m);
  const double sigma = 0.01;
  Tensor pred = gt;
  for (double& v : pred.d) v += sigma * rng.normal();
  const UvErrorReport err = uv_error(pred, gt, 128);
  // E|n| for an isotropic Gaussian pair is sigma*sqrt(pi/2); one uv unit is
  // 64 texels of a 128 atlas spanning [-1, 1].
  const double expected = sigma * std::sqrt(std::acos(-1.0) / 2.0) * 64.0;
  CHECK(err.mean_texels == doctest::Approx(expected).epsilon(0.1));
}

TEST_CASE("temporal consistency is 0 for a static scene and matches ground truth closely") {
  SyntheticScene s = small_scene();
  s.vel_x = 0.0;  // static sprite: consecutive frames are identical
  auto [video, gt] = generate_synthetic_video(s);
  CHECK(temporal_consistency(video.frames, gt) == doctest::Approx(0.0).epsilon(1e-12));

  auto [moving, gt_moving] = generate_synthetic_video(small_scene());
  CHECK(temporal_consistency(moving.frames, gt_moving) <= 0.02);  // warp floor
}

TEST_CASE("temporal consistency of uncorrelated noise approaches one third") {
  // Integer flow makes the warp land on exact pixels, so the metric reduces
  // to E|U - U'| = 1/3 for independent uniforms.
  auto [video, gt] = generate_synthetic_video(small_scene());
  Rng rng(75);
  std::vector<Image> noise;
  for (int k = 0; k < gt.scene.frames; ++k) {
    Image img(gt.scene.width, gt.scene.height, 3);
    for (double& v : img.px) v = rng.uniform();
    noise.push_back(img);
  }
  const double tc = temporal_consistency(noise, gt);
  CHECK(tc == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}
