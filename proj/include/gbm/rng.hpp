#pragma once

#include <cmath>
#include <cstdint>

namespace gbm {

// SplitMix64: 64-bit additive counter with an avalanching output function.
// One instance per logical stream; streams never share state.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit constexpr SplitMix64(std::uint64_t s) : state(s) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

// Bijective 64-bit finalizer used to derive stream states from keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Identifies one logical stream of paths: (seed, stream, substream).
// Every path index hashes to its own SplitMix64 state, so any path is
// reproducible in isolation and batches can be evaluated in any order.
struct StreamKey {
  std::uint64_t root;

  static constexpr StreamKey derive(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t substream) {
    std::uint64_t h = mix64(seed ^ 0xA0761D6478BD642Full);
    h = mix64(h ^ stream * 0xE7037ED1A0B428DBull);
    h = mix64(h ^ substream * 0x8EBC6AF09C88C6E3ull);
    return StreamKey{h};
  }

  constexpr SplitMix64 path_engine(std::uint64_t path_index) const {
    return SplitMix64(mix64(root ^ path_index * 0x589965CC75374CC3ull));
  }
};

// Uniform in (0,1): 53-bit mantissa offset by half an ulp, never 0 or 1.
inline double uniform01(SplitMix64& g) {
  return (static_cast<double>(g.next() >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal draws via the Marsaglia polar method.
// When zeroed() the stream yields 0.0 forever (deterministic-path test hook).
class NormalStream {
 public:
  explicit NormalStream(SplitMix64 engine, bool zero = false)
      : engine_(engine), zero_(zero) {}

  double next() {
    if (zero_) return 0.0;
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01(engine_) - 1.0;
      v = 2.0 * uniform01(engine_) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  bool zeroed() const { return zero_; }

 private:
  SplitMix64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
  bool zero_ = false;
};

}  // namespace gbm
