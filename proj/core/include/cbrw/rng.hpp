#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace cbrw {

// Counter-based stream: output n is mix(key + n*gamma), so streams are
// random-access and splitting is just key derivation. Identical (seed, index)
// always yields the identical sequence regardless of thread placement.
class RngStream {
public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  // stream i of a master seed; mix twice so adjacent indices decorrelate
  static RngStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(mix(mix(master_seed ^ 0x9E3779B97F4A7C15ULL) + index));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double exponential(double rate) {
    // -log(1-U)/rate; U in [0,1) so the argument never hits 0
    return -std::log1p(-next_double()) / rate;
  }

  // index into a cumulative-probability table (cum.back() == 1 up to rounding)
  std::size_t pick(std::span<const double> cum) {
    const double u = next_double();
    std::size_t lo = 0, hi = cum.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cum[mid]) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27; z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

private:
  std::uint64_t state_;
};

}  // namespace cbrw
