#include "dplan/rng.hpp"

#include <cmath>
#include <numbers>

namespace dplan {

double RngStream::normal() {
  // u1 in (0, 1] so the log is always finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace {
std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t stream_key(std::uint64_t master, std::string_view name,
                         std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = fnv1a64(name);
  h = mix(h ^ (master + 0x9E3779B97F4A7C15ull));
  h = mix(h ^ (a + 0x9E3779B97F4A7C15ull));
  h = mix(h ^ (b + 0x9E3779B97F4A7C15ull));
  return h;
}

}  // namespace dplan
