#pragma once

#include <cstdint>
#include <string_view>

namespace dplan {

// Deterministic splitmix64 generator. Every random draw in the project flows
// from a master seed through named derived streams, so any run is bitwise
// reproducible on the same platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller; a fresh pair of uniforms per draw keeps
  // the stream position independent of call history.
  double normal();

 private:
  std::uint64_t state_;
};

// Stable 64-bit key for a named substream: FNV-1a over the name mixed with
// the master seed and two optional indices.
std::uint64_t stream_key(std::uint64_t master, std::string_view name,
                         std::uint64_t a = 0, std::uint64_t b = 0);

inline RngStream derive_stream(std::uint64_t master, std::string_view name,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
  return RngStream(stream_key(master, name, a, b));
}

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace dplan
