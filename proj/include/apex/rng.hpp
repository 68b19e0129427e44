#pragma once

#include <cmath>
#include <cstdint>

namespace apex {

// Deterministic PRNG stream. Wraps a splitmix64 generator with explicit
// uniform/normal draws so that sequences are reproducible across platforms
// (std::normal_distribution is implementation-defined).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {
    // avoid the all-zero fixed point
    next_u64();
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // integer in [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // standard normal via Box-Muller (cached pair)
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    // keep log() finite
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // derive an independent stream; streams with distinct ids never collide
  RngStream spawn(std::uint64_t stream_id) {
    std::uint64_t mixed = next_u64() ^ (0xd1342543de82ef95ULL * (stream_id + 1));
    return RngStream(mixed);
  }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace apex
