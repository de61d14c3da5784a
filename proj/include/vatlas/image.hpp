#pragma once

#include <filesystem>
#include <vector>

// Images are dense row-major double arrays in [0, 1] with 1 (gray), 3 (RGB)
// or 4 (RGBA) interleaved channels. Files store 8-bit samples: values are
// quantized with round(v * 255) clamped to [0, 255] on save and mapped back
// as v / 255 on load. Supported containers: binary PPM (P6, RGB), binary
// PGM (P5, gray) and non-interlaced 8-bit PNG (gray / RGB / RGBA).

namespace vatlas {

struct Image {
  int w = 0, h = 0, c = 0;
  std::vector<double> px;  // ((y * w) + x) * c + channel

  Image() = default;
  Image(int w_, int h_, int c_);

  double& at(int y, int x, int ch) { return px[(std::size_t(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return px[(std::size_t(y) * w + x) * c + ch]; }

  bool same_shape(const Image& o) const { return w == o.w && h == o.h && c == o.c; }

  // Bilinear sample at continuous pixel coordinates; (x, y) in pixel units
  // with sample points at pixel centers (x + 0.5), border-clamped.
  void sample_bilinear(double x, double y, double* out) const;

  Image channel(int ch) const;                 // single-channel copy
  Image resized_bilinear(int nw, int nh) const;
};

std::uint8_t quantize8(double v);
inline double dequantize8(std::uint8_t b) { return b / 255.0; }

// Quantize to 8 bits and back; files round-trip through exactly this map.
Image quantized(const Image& img);

void save_image(const std::filesystem::path& path, const Image& img);  // by extension
Image load_image(const std::filesystem::path& path);

// Format-specific entry points (save_image/load_image dispatch on extension).
void save_ppm(const std::filesystem::path& path, const Image& img);
Image load_ppm(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& img);
Image load_png(const std::filesystem::path& path);

}  // namespace vatlas
