#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic random source. mt19937_64 supplies the bits; the
// distributions are written out by hand because the std:: ones are
// implementation-defined, which would break bit-reproducibility of
// checkpoints and frozen test values across toolchains.

namespace vatlas {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const double span = double(hi) - double(lo) + 1.0;
    int off = int(uniform() * span);
    if (off >= int(span)) off = int(span) - 1;  // uniform() can be arbitrarily close to 1
    return lo + off;
  }

  // Derive an independent stream, e.g. one per pipeline stage.
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vatlas
