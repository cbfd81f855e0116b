#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace eks {

/// Deterministic Gaussian sampler built on std::mt19937_64 raw output.
/// The standard distributions' transforms are implementation-defined, so a
/// fixed uniform mapping and the Marsaglia polar method are spelled out
/// here to make experiment artifacts byte-identical across toolchains.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in (0, 1], using the top 53 bits of the engine output.
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal draw; generates pairs and caches the spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, r2;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      r2 = u * u + v * v;
    } while (r2 >= 1.0 || r2 == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(r2) / r2);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace eks
