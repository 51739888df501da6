#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace multipath {

// Role of a stream inside one sampler run. Each (run, path, phase) triple
// names an independent stream.
enum class Phase : std::uint32_t {
  init = 1,    // random initial assignments
  sweep = 2,   // site resampling
  params = 3,  // parameter (phi) draws
  data = 4,    // synthetic data generation
  aux = 5,     // anything else (e.g. random EM starts)
};

struct StreamId {
  std::uint64_t run = 0;
  std::uint64_t path = 0;
  Phase phase = Phase::aux;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, const StreamId& id) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ id.run);
  h = splitmix64(h ^ (id.path * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(id.phase));
  return h;
}

}  // namespace detail

/// Seedable random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; every variate is derived from raw
/// engine words here rather than through <random> distributions, whose
/// algorithms are implementation-defined. Draws are therefore identical
/// across platforms and standard libraries.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, StreamId id = {})
      : engine_(detail::stream_key(seed, id)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    auto wide = static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Standard normal (Marsaglia polar method).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Logarithm of a Gamma(shape, 1) variate, shape > 0. Working in log space
  /// keeps tiny shapes (where the variate itself underflows) usable.
  double log_gamma_variate(double shape) {
    if (shape < 1.0) {
      // Gamma(a) = Gamma(a + 1) * U^(1/a)
      return log_gamma_variate(shape + 1.0) + std::log(uniform_open()) / shape;
    }
    // Marsaglia & Tsang.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double log_u = std::log(uniform_open());
      if (log_u < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d) + std::log(v);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace multipath
