#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "vatlas/image.hpp"
#include "vatlas/rng.hpp"
#include "vatlas/texture.hpp"

using namespace vatlas;

namespace fs = std::filesystem;

namespace {

Image random_image(Rng& rng, int w, int h, int c) {
  Image img(w, h, c);
  for (double& v : img.px) v = rng.uniform();
  return img;
}

AtlasTexture random_texture(Rng& rng, int size, int channels) {
  AtlasTexture tex(size, channels);
  for (double& v : tex.texels) v = rng.uniform();
  return tex;
}

// Independent scalar reimplementation of the documented sampling contract.
BilinearSample oracle_sample(const AtlasTexture& tex, double u, double v) {
  BilinearSample out;
  out.channels = tex.channels;
  const double su = double(tex.size) / (tex.u1 - tex.u0);
  const double sv = double(tex.size) / (tex.v1 - tex.v0);
  double s = (u - tex.u0) * su - 0.5;
  double t = (v - tex.v0) * sv - 0.5;
  const bool clamp_u = s < 0.0 || s > tex.size - 1.0;
  const bool clamp_v = t < 0.0 || t > tex.size - 1.0;
  s = std::clamp(s, 0.0, double(tex.size - 1));
  t = std::clamp(t, 0.0, double(tex.size - 1));
  const int i0 = std::min(int(s), tex.size - 2);
  const int j0 = std::min(int(t), tex.size - 2);
  const double fu = s - i0;
  const double fv = t - j0;
  for (int c = 0; c < tex.channels; ++c) {
    const double t00 = tex.at(j0, i0, c), t10 = tex.at(j0, i0 + 1, c);
    const double t01 = tex.at(j0 + 1, i0, c), t11 = tex.at(j0 + 1, i0 + 1, c);
    out.value[c] = (1 - fu) * (1 - fv) * t00 + fu * (1 - fv) * t10 + (1 - fu) * fv * t01 +
                   fu * fv * t11;
    out.du[c] = clamp_u ? 0.0 : ((t10 - t00) * (1 - fv) + (t11 - t01) * fv) * su;
    out.dv[c] = clamp_v ? 0.0 : ((t01 - t00) * (1 - fu) + (t11 - t10) * fu) * sv;
  }
  return out;
}

fs::path temp_dir() {
  static int counter = 0;
  fs::path p = fs::temp_directory_path() / ("vatlas_img_test_" + std::to_string(::getpid()) +
                                            "_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("quantization basics") {
  CHECK(quantize8(0.0) == 0);
  CHECK(quantize8(1.0) == 255);
  CHECK(quantize8(-5.0) == 0);    // clamps
  CHECK(quantize8(5.0) == 255);
  for (int b = 0; b <= 255; ++b) CHECK(quantize8(dequantize8(std::uint8_t(b))) == b);
}

TEST_CASE("png round trip is exact for quantized images") {
  Rng rng(41);
  fs::path dir = temp_dir();
  for (int c : {1, 3, 4}) {
    Image img = quantized(random_image(rng, 13, 9, c));
    fs::path file = dir / ("img_" + std::to_string(c) + ".png");
    save_png(file, img);
    Image back = load_png(file);
    REQUIRE(back.same_shape(img));
    CHECK(back.px == img.px);
  }
  fs::remove_all(dir);
}

TEST_CASE("ppm round trip is exact for quantized rgb") {
  Rng rng(42);
  fs::path dir = temp_dir();
  Image img = quantized(random_image(rng, 6, 11, 3));
  save_ppm(dir / "img.ppm", img);
  Image back = load_ppm(dir / "img.ppm");
  REQUIRE(back.same_shape(img));
  CHECK(back.px == img.px);
  fs::remove_all(dir);
}

TEST_CASE("save_image dispatches on extension") {
  Rng rng(43);
  fs::path dir = temp_dir();
  Image img = quantized(random_image(rng, 5, 5, 3));
  save_image(dir / "a.png", img);
  save_image(dir / "a.ppm", img);
  CHECK(load_image(dir / "a.png").px == img.px);
  CHECK(load_image(dir / "a.ppm").px == img.px);
  fs::remove_all(dir);
}

TEST_CASE("image bilinear sampling hits pixel centers exactly") {
  Rng rng(44);
  Image img = random_image(rng, 7, 5, 3);
  double out[4];
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      img.sample_bilinear(x + 0.5, y + 0.5, out);
      for (int c = 0; c < 3; ++c) CHECK(out[c] == img.at(y, x, c));
    }
}

TEST_CASE("bilinear texture sampling matches an independent oracle exactly") {
  Rng rng(45);
  for (int channels : {1, 3, 4}) {
    AtlasTexture tex = random_texture(rng, 17, channels);
    for (int trial = 0; trial < 10000 / 3; ++trial) {
      const double u = rng.uniform(-1.4, 1.4);  // includes out-of-range samples
      const double v = rng.uniform(-1.4, 1.4);
      BilinearSample got = bilinear_sample(tex, u, v);
      BilinearSample want = oracle_sample(tex, u, v);
      for (int c = 0; c < channels; ++c) {
        REQUIRE(got.value[c] == want.value[c]);
        REQUIRE(got.du[c] == want.du[c]);
        REQUIRE(got.dv[c] == want.dv[c]);
      }
    }
  }
}

TEST_CASE("bilinear weights form a partition of unity") {
  AtlasTexture ones(9, 1);
  for (double& t : ones.texels) t = 1.0;
  Rng rng(46);
  for (int trial = 0; trial < 500; ++trial) {
    BilinearSample s = bilinear_sample(ones, rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
    CHECK(s.value[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.du[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(s.dv[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("uv gradients match finite differences away from cell edges") {
  Rng rng(47);
  AtlasTexture tex = random_texture(rng, 12, 3);
  const double eps = 1e-7;
  int checked = 0;
  while (checked < 400) {
    const double u = rng.uniform(-0.95, 0.95);
    const double v = rng.uniform(-0.95, 0.95);
    // Skip draws whose +-eps probes could straddle a texel cell boundary.
    const double s = (u - tex.u0) / (tex.u1 - tex.u0) * tex.size - 0.5;
    const double t = (v - tex.v0) / (tex.v1 - tex.v0) * tex.size - 0.5;
    const double fs = s - std::floor(s), ft = t - std::floor(t);
    if (fs < 0.01 || fs > 0.99 || ft < 0.01 || ft > 0.99) continue;
    ++checked;
    BilinearSample mid = bilinear_sample(tex, u, v);
    BilinearSample up = bilinear_sample(tex, u + eps, v);
    BilinearSample um = bilinear_sample(tex, u - eps, v);
    BilinearSample vp = bilinear_sample(tex, u, v + eps);
    BilinearSample vm = bilinear_sample(tex, u, v - eps);
    for (int c = 0; c < 3; ++c) {
      const double fdu = (up.value[c] - um.value[c]) / (2 * eps);
      const double fdv = (vp.value[c] - vm.value[c]) / (2 * eps);
      CHECK(mid.du[c] == doctest::Approx(fdu).epsilon(1e-6));
      CHECK(mid.dv[c] == doctest::Approx(fdv).epsilon(1e-6));
    }
  }
}

TEST_CASE("sampling requires at least 2x2 texels") {
  AtlasTexture tiny(1, 1);
  tiny.texels = {0.5};
  CHECK_THROWS_AS(bilinear_sample(tiny, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("resize to the same side length reproduces every texel") {
  Rng rng(48);
  AtlasTexture tex = random_texture(rng, 10, 3);
  AtlasTexture same = resize_texture(tex, 10);
  REQUIRE(same.texels.size() == tex.texels.size());
  for (std::size_t i = 0; i < tex.texels.size(); ++i)
    CHECK(same.texels[i] == doctest::Approx(tex.texels[i]).epsilon(1e-12));
}

TEST_CASE("resize preserves constants and the uv rectangle") {
  AtlasTexture tex(6, 2);
  for (double& t : tex.texels) t = 0.37;
  tex.u0 = -0.5;
  tex.u1 = 1.5;
  AtlasTexture big = resize_texture(tex, 13);
  CHECK(big.size == 13);
  CHECK(big.u0 == tex.u0);
  CHECK(big.u1 == tex.u1);
  for (double t : big.texels) CHECK(t == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("texture and image views copy verbatim") {
  Rng rng(49);
  AtlasTexture tex = random_texture(rng, 8, 4);
  Image img = texture_to_image(tex);
  CHECK(img.w == 8);
  CHECK(img.h == 8);
  CHECK(img.c == 4);
  CHECK(img.px == tex.texels);
  AtlasTexture back = texture_from_image(img);
  CHECK(back.texels == tex.texels);
  CHECK(back.size == tex.size);

  Image wide(3, 2, 1);
  CHECK_THROWS_AS(texture_from_image(wide), std::invalid_argument);

  AtlasTexture rgb = tex.channel_slice(0, 3);
  AtlasTexture alpha = tex.channel_slice(3, 1);
  CHECK(rgb.channels == 3);
  CHECK(alpha.channels == 1);
  for (int j = 0; j < tex.size; ++j)
    for (int i = 0; i < tex.size; ++i) {
      for (int c = 0; c < 3; ++c) CHECK(rgb.at(j, i, c) == tex.at(j, i, c));
      CHECK(alpha.at(j, i, 0) == tex.at(j, i, 3));
    }
}

TEST_CASE("image resize preserves constants") {
  Image img(5, 7, 3);
  for (double& v : img.px) v = 0.61;
  Image big = img.resized_bilinear(11, 4);
  CHECK(big.w == 11);
  CHECK(big.h == 4);
  for (double v : big.px) CHECK(v == doctest::Approx(0.61).epsilon(1e-15));
}
