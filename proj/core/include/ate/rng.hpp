#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ate {

// Deterministic RNG used everywhere seeds appear. mt19937_64 is pinned by the
// standard, and the value mappings below avoid std::*_distribution, whose
// output is implementation-defined. Two builds on different platforms draw
// identical streams from the same seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [lo, hi). 53-bit mantissa mapping.
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  // Standard normal via Box-Muller. Consumes two uniforms per call.
  double normal();

  // Uniform integer in [0, n). Rejection sampling, n > 0.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Derives an independent seed for a named sub-stream, so that e.g. the
  // train/validation split and dropout masks never share draws.
  static std::uint64_t derive(std::uint64_t seed, std::string_view stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ate
