#include "vatlas/texture.hpp"

#include <cmath>
#include <stdexcept>

#include "vatlas/image.hpp"

namespace vatlas {

AtlasTexture::AtlasTexture(int size_, int channels_) : size(size_), channels(channels_) {
  if (size_ < 1 || channels_ < 1 || channels_ > 4)
    throw std::invalid_argument("AtlasTexture: bad size or channel count");
  texels.assign(std::size_t(size_) * size_ * channels_, 0.0);
}

AtlasTexture AtlasTexture::channel_slice(int first, int count) const {
  if (first < 0 || count < 1 || first + count > channels)
    throw std::invalid_argument("channel_slice: channel range out of bounds");
  AtlasTexture out(size, count);
  out.u0 = u0; out.v0 = v0; out.u1 = u1; out.v1 = v1;
  for (int j = 0; j < size; ++j)
    for (int i = 0; i < size; ++i)
      for (int c = 0; c < count; ++c) out.at(j, i, c) = at(j, i, first + c);
  return out;
}

namespace {

struct Axis {
  int i0;
  double f;       // fraction toward i0+1
  double dsd;     // d(continuous coord)/d(uv), 0 where clamped
};

Axis resolve_axis(double x, double lo, double hi, int size) {
  const double s = (x - lo) / (hi - lo) * size - 0.5;
  double sc = s;
  double dsd = size / (hi - lo);
  if (!(s > 0.0 && s < double(size - 1))) dsd = 0.0;
  if (sc < 0.0) sc = 0.0;
  if (sc > double(size - 1)) sc = double(size - 1);
  int i0 = int(std::floor(sc));
  if (i0 > size - 2) i0 = size - 2;
  return {i0, sc - i0, dsd};
}

}  // namespace

BilinearSample bilinear_sample(const AtlasTexture& tex, double u, double v) {
  if (tex.size < 2) throw std::invalid_argument("bilinear_sample: texture size must be >= 2");
  const Axis au = resolve_axis(u, tex.u0, tex.u1, tex.size);
  const Axis av = resolve_axis(v, tex.v0, tex.v1, tex.size);
  const double fu = au.f, fv = av.f;

  BilinearSample out;
  out.channels = tex.channels;
  for (int c = 0; c < tex.channels; ++c) {
    const double t00 = tex.at(av.i0, au.i0, c);
    const double t10 = tex.at(av.i0, au.i0 + 1, c);
    const double t01 = tex.at(av.i0 + 1, au.i0, c);
    const double t11 = tex.at(av.i0 + 1, au.i0 + 1, c);
    out.value[c] = (1.0 - fu) * (1.0 - fv) * t00 + fu * (1.0 - fv) * t10 +
                   (1.0 - fu) * fv * t01 + fu * fv * t11;
    out.du[c] = ((t10 - t00) * (1.0 - fv) + (t11 - t01) * fv) * au.dsd;
    out.dv[c] = ((t01 - t00) * (1.0 - fu) + (t11 - t10) * fu) * av.dsd;
  }
  return out;
}

AtlasTexture resize_texture(const AtlasTexture& tex, int new_size) {
  AtlasTexture out(new_size, tex.channels);
  out.u0 = tex.u0; out.v0 = tex.v0; out.u1 = tex.u1; out.v1 = tex.v1;
  for (int j = 0; j < new_size; ++j) {
    const double v = out.texel_v(j);
    for (int i = 0; i < new_size; ++i) {
      const BilinearSample s = bilinear_sample(tex, out.texel_u(i), v);
      for (int c = 0; c < tex.channels; ++c) out.at(j, i, c) = s.value[c];
    }
  }
  return out;
}

Image texture_to_image(const AtlasTexture& tex) {
  Image img(tex.size, tex.size, tex.channels);
  img.px = tex.texels;
  return img;
}

AtlasTexture texture_from_image(const Image& img) {
  if (img.w != img.h) throw std::invalid_argument("texture_from_image: image must be square");
  AtlasTexture tex(img.w, img.c);
  tex.texels = img.px;
  return tex;
}

}  // namespace vatlas
