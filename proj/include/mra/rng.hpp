#pragma once

#include <cmath>
#include <cstdint>

namespace mra {

/// SplitMix64 generator (Steele, Lea, Flood 2014). Used both as a stream
/// splitter and as the draw engine, so every observation owns an
/// independent, order-free substream derived from (seed, index).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; draws exactly two uniforms per pair.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Hash-combines two 64-bit values into a substream seed. Repeated
/// application defines the documented derivation chain:
///   cell  = mix(mix(mix(master, signal_index), m), trial)
///   obs_j = mix(cell, j)
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 s(a);
  SplitMix64 t(s.next() ^ (b + 0x9e3779b97f4a7c15ull));
  return t.next();
}

}  // namespace mra
