#pragma once

#include <cmath>
#include <cstdint>

namespace spire {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Small deterministic generator with cheap keyed substream derivation.
// Substreams let trial generation, dropout masks and shuffles be pure
// functions of (seed, tags...), so parallel and serial execution produce
// identical bits. Not cryptographic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0xA0761D6478BD642Full)) {}

  // Derive an independent stream keyed by `tag`. Never advances *this.
  Rng sub(std::uint64_t tag) const {
    Rng r(0);
    r.state_ = mix64(state_ ^ mix64(tag ^ 0xE7037ED1A0B428DBull));
    return r;
  }
  Rng sub(std::uint64_t a, std::uint64_t b) const { return sub(a).sub(b); }
  Rng sub(std::uint64_t a, std::uint64_t b, std::uint64_t c) const { return sub(a).sub(b).sub(c); }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; one value per call so substream
  // consumption stays position-independent.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = uniform_int(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stream tags used across the generator and trainer. Values are arbitrary
// but fixed: changing them changes every seeded output.
namespace stream {
constexpr std::uint64_t latents = 1;
constexpr std::uint64_t warp = 2;
constexpr std::uint64_t mixing = 3;
constexpr std::uint64_t noise = 4;
constexpr std::uint64_t shared = 5;
constexpr std::uint64_t priv = 6;
constexpr std::uint64_t init = 7;
constexpr std::uint64_t shuffle = 8;
constexpr std::uint64_t dropout = 9;
constexpr std::uint64_t split = 10;
constexpr std::uint64_t folds = 11;
constexpr std::uint64_t forest = 12;
}  // namespace stream

}  // namespace spire
