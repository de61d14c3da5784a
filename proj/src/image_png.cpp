#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "vatlas/image.hpp"

// Minimal PNG support: 8-bit, color types 0 (gray), 2 (RGB), 6 (RGBA),
// non-interlaced. The writer emits filter type 0 for every scanline and one
// IDAT chunk; the reader handles all five standard scanline filters.

namespace vatlas {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t len) {
  put_be32(out, std::uint32_t(len));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  std::uint32_t crc = std::uint32_t(::crc32(0, out.data() + type_pos, uInt(4 + len)));
  put_be32(out, crc);
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return 0;
    case 3: return 2;
    case 4: return 6;
  }
  throw std::invalid_argument("save_png: unsupported channel count");
}

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 6: return 4;
  }
  throw std::runtime_error("load_png: unsupported color type");
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void save_png(const std::filesystem::path& path, const Image& img) {
  const int bpp = img.c;
  const std::size_t stride = std::size_t(img.w) * bpp;
  std::vector<std::uint8_t> raw((stride + 1) * img.h);
  for (int y = 0; y < img.h; ++y) {
    std::uint8_t* row = raw.data() + std::size_t(y) * (stride + 1);
    row[0] = 0;  // filter: none
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch)
        row[1 + std::size_t(x) * bpp + ch] = quantize8(img.at(y, x, ch));
  }

  uLongf comp_cap = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> comp(comp_cap);
  if (compress2(comp.data(), &comp_cap, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw std::runtime_error("save_png: deflate failed");
  comp.resize(comp_cap);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kSignature, kSignature + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = std::uint8_t(img.w >> 24); ihdr[1] = std::uint8_t(img.w >> 16);
  ihdr[2] = std::uint8_t(img.w >> 8);  ihdr[3] = std::uint8_t(img.w);
  ihdr[4] = std::uint8_t(img.h >> 24); ihdr[5] = std::uint8_t(img.h >> 16);
  ihdr[6] = std::uint8_t(img.h >> 8);  ihdr[7] = std::uint8_t(img.h);
  ihdr[8] = 8;  // bit depth
  ihdr[9] = std::uint8_t(color_type_for(img.c));
  ihdr[10] = 0; ihdr[11] = 0; ihdr[12] = 0;  // deflate, adaptive filters, no interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", comp.data(), comp.size());
  append_chunk(out, "IEND", nullptr, 0);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_png: cannot open " + path.string());
  os.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!os) throw std::runtime_error("save_png: write failed for " + path.string());
}

Image load_png(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_png: cannot open " + path.string());
  std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0)
    throw std::runtime_error("load_png: not a PNG file: " + path.string());

  int w = 0, h = 0, channels = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  while (pos + 8 <= file.size()) {
    const std::uint32_t len = read_be32(file.data() + pos);
    if (pos + 12 + len > file.size()) throw std::runtime_error("load_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const std::uint8_t* data = file.data() + pos + 8;
    const std::uint32_t want = read_be32(file.data() + pos + 8 + len);
    const std::uint32_t got = std::uint32_t(::crc32(0, file.data() + pos + 4, uInt(4 + len)));
    if (want != got) throw std::runtime_error("load_png: chunk CRC mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("load_png: bad IHDR");
      w = int(read_be32(data));
      h = int(read_be32(data + 4));
      if (data[8] != 8) throw std::runtime_error("load_png: only 8-bit depth supported");
      channels = channels_for(data[9]);
      if (data[12] != 0) throw std::runtime_error("load_png: interlaced files not supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0 || channels == 0 || idat.empty())
    throw std::runtime_error("load_png: missing IHDR or IDAT");

  const std::size_t stride = std::size_t(w) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * h);
  uLongf raw_len = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw std::runtime_error("load_png: inflate failed");

  // Undo per-scanline filters in place.
  const int bpp = channels;
  std::vector<std::uint8_t> prev(stride, 0);
  Image img(w, h, channels);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[std::size_t(y) * (stride + 1)];
    std::uint8_t* row = raw.data() + std::size_t(y) * (stride + 1) + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      const int left = i >= std::size_t(bpp) ? row[i - bpp] : 0;
      const int up = prev[i];
      const int ul = i >= std::size_t(bpp) ? prev[i - bpp] : 0;
      int v = row[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += paeth(left, up, ul); break;
        default: throw std::runtime_error("load_png: unknown scanline filter");
      }
      row[i] = std::uint8_t(v);
    }
    std::memcpy(prev.data(), row, stride);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < channels; ++ch)
        img.at(y, x, ch) = dequantize8(row[std::size_t(x) * channels + ch]);
  }
  return img;
}

}  // namespace vatlas
