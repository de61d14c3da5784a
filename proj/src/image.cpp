#include "vatlas/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace vatlas {

Image::Image(int w_, int h_, int c_) : w(w_), h(h_), c(c_) {
  if (w_ < 1 || h_ < 1 || c_ < 1 || c_ > 4)
    throw std::invalid_argument("Image: bad dimensions or channel count");
  px.assign(std::size_t(w_) * h_ * c_, 0.0);
}

void Image::sample_bilinear(double x, double y, double* out) const {
  const double sx = std::clamp(x - 0.5, 0.0, double(w - 1));
  const double sy = std::clamp(y - 0.5, 0.0, double(h - 1));
  int x0 = int(std::floor(sx));
  int y0 = int(std::floor(sy));
  if (x0 > w - 2) x0 = std::max(0, w - 2);
  if (y0 > h - 2) y0 = std::max(0, h - 2);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  for (int ch = 0; ch < c; ++ch) {
    const double top = (1.0 - fx) * at(y0, x0, ch) + fx * at(y0, x1, ch);
    const double bot = (1.0 - fx) * at(y1, x0, ch) + fx * at(y1, x1, ch);
    out[ch] = (1.0 - fy) * top + fy * bot;
  }
}

Image Image::channel(int ch) const {
  if (ch < 0 || ch >= c) throw std::invalid_argument("Image::channel: index out of range");
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x, 0) = at(y, x, ch);
  return out;
}

Image Image::resized_bilinear(int nw, int nh) const {
  Image out(nw, nh, c);
  double buf[4];
  for (int y = 0; y < nh; ++y) {
    const double sy = (y + 0.5) * h / double(nh);
    for (int x = 0; x < nw; ++x) {
      const double sx = (x + 0.5) * w / double(nw);
      sample_bilinear(sx, sy, buf);
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = buf[ch];
    }
  }
  return out;
}

std::uint8_t quantize8(double v) {
  const double scaled = std::round(v * 255.0);
  return std::uint8_t(std::clamp(scaled, 0.0, 255.0));
}

Image quantized(const Image& img) {
  Image out = img;
  for (double& v : out.px) v = dequantize8(quantize8(v));
  return out;
}

void save_ppm(const std::filesystem::path& path, const Image& img) {
  if (img.c != 1 && img.c != 3)
    throw std::invalid_argument("save_ppm: PPM/PGM support 1 or 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_ppm: cannot open " + path.string());
  os << (img.c == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
  std::vector<std::uint8_t> row(std::size_t(img.w) * img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch)
        row[std::size_t(x) * img.c + ch] = quantize8(img.at(y, x, ch));
    os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
  if (!os) throw std::runtime_error("save_ppm: write failed for " + path.string());
}

namespace {

int ppm_next_int(std::istream& is) {
  // Skips whitespace and '#' comments, as the format allows in the header.
  int ch = is.get();
  while (ch != EOF && (std::isspace(ch) || ch == '#')) {
    if (ch == '#')
      while (ch != EOF && ch != '\n') ch = is.get();
    ch = is.get();
  }
  int value = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    any = true;
    ch = is.get();
  }
  if (!any) throw std::runtime_error("ppm: malformed header");
  return value;
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_ppm: cannot open " + path.string());
  char p = 0, kind = 0;
  is.get(p);
  is.get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    throw std::runtime_error("load_ppm: not a binary PPM/PGM file: " + path.string());
  const int w = ppm_next_int(is);
  const int h = ppm_next_int(is);
  const int maxval = ppm_next_int(is);
  if (maxval != 255) throw std::runtime_error("load_ppm: only 8-bit files are supported");
  const int c = kind == '6' ? 3 : 1;
  Image img(w, h, c);
  std::vector<std::uint8_t> row(std::size_t(w) * c);
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
    if (!is) throw std::runtime_error("load_ppm: truncated file " + path.string());
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) img.at(y, x, ch) = dequantize8(row[std::size_t(x) * c + ch]);
  }
  return img;
}

void save_image(const std::filesystem::path& path, const Image& img) {
  const std::string ext = path.extension().string();
  if (ext == ".png") return save_png(path, img);
  if (ext == ".ppm" || ext == ".pgm") return save_ppm(path, img);
  throw std::invalid_argument("save_image: unsupported extension " + ext);
}

Image load_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png") return load_png(path);
  if (ext == ".ppm" || ext == ".pgm") return load_ppm(path);
  throw std::invalid_argument("load_image: unsupported extension " + ext);
}

}  // namespace vatlas
