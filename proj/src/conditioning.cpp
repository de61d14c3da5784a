#include "vatlas/conditioning.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace vatlas {

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void l2_normalize(Tensor& t) {
  double sq = 0.0;
  for (double v : t.d) sq += v * v;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : t.d) v *= inv;
  }
}

}  // namespace

Tensor embed_caption(const std::string& caption, const ConditioningConfig& cfg) {
  Tensor e(1, cfg.text_dim);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    // Dense seeded direction per token. A single signed slot per token would
    // let two tokens of one caption cancel to an exactly zero embedding at
    // small dims, silently collapsing onto the unconditional branch.
    Rng dir(fnv1a(token, cfg.embed_seed));
    for (double& v : e.d) v += dir.uniform(-1.0, 1.0);
    token.clear();
  };
  for (char ch : caption) {
    if (std::isspace(static_cast<unsigned char>(ch)))
      flush();
    else
      token.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
  }
  flush();
  l2_normalize(e);
  return e;
}

Tensor embed_reference_image(const Image& img, const ConditioningConfig& cfg) {
  if (img.c < 1) throw std::invalid_argument("embed_reference_image: empty image");
  Tensor e(1, cfg.image_dim);
  const int p = cfg.patch;
  int patches = 0;
  std::vector<double> patch_vec(std::size_t(p) * p * img.c);
  for (int py = 0; py + p <= img.h; py += p) {
    for (int px = 0; px + p <= img.w; px += p) {
      std::size_t i = 0;
      for (int y = py; y < py + p; ++y)
        for (int x = px; x < px + p; ++x)
          for (int ch = 0; ch < img.c; ++ch) patch_vec[i++] = img.at(y, x, ch);
      // Seeded random projection; the generator restarts per patch so the
      // projection matrix is the same for every patch position.
      Rng proj(cfg.embed_seed ^ 0x9e3779b97f4a7c15ull);
      for (int d = 0; d < cfg.image_dim; ++d) {
        double acc = 0.0;
        for (double v : patch_vec) acc += v * proj.uniform(-1.0, 1.0);
        e.d[d] += acc;
      }
      ++patches;
    }
  }
  if (patches == 0) throw std::invalid_argument("embed_reference_image: image smaller than patch");
  for (double& v : e.d) v /= patches;
  l2_normalize(e);
  return e;
}

Tensor null_embedding(int dim) { return Tensor(1, dim); }

ConditioningContext ConditioningContext::null_context(const ConditioningConfig& cfg) {
  return {null_embedding(cfg.text_dim), null_embedding(cfg.image_dim)};
}

Tensor corrupt_embedding(const Tensor& e, int t, int max_level, const NoiseSchedule& s, Rng& rng) {
  if (t > max_level)
    throw std::invalid_argument("corrupt_embedding: noise level exceeds the allowed cap");
  const double ab = s.abar_at(t);
  Tensor out(e.rows, e.cols);
  const double noise_scale = std::sqrt((1.0 - ab) / double(e.cols));
  for (std::size_t i = 0; i < e.size(); ++i)
    out.d[i] = std::sqrt(ab) * e.d[i] + noise_scale * rng.normal();
  return out;
}

}  // namespace vatlas
