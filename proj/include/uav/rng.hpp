#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "uav/errors.hpp"

namespace uav {

// Counter-based deterministic generator (splitmix64 over key + counter).
// Identical (key, counter) yields identical draws on every platform; streams
// fork by label so adding a consumer never perturbs existing ones.
struct RngStream {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  static RngStream from_seed(std::uint64_t seed) { return RngStream{mix(seed + kGamma), 0}; }

  RngStream substream(std::string_view label, std::uint64_t index = 0) const {
    return RngStream{mix(key ^ (hash_label(label) + index * kGamma)), 0};
  }

  // Same stream positioned at an absolute counter; lets per-step consumers
  // address draws by step index instead of relying on call order.
  RngStream at(std::uint64_t c) const { return RngStream{key, c}; }

  std::uint64_t next_u64() { return mix(key + (counter++) * kGamma); }

  // Uniform in [0, 1): top 53 bits of the draw.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Uniform integer in [0, n). n up to 2^53 is plenty here.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw PreconditionError("next_below: n must be positive");
    return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
  }

  // Box-Muller; always consumes exactly two draws so the counter advances
  // identically regardless of caller mix.
  double normal() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Standard truncated-normal init draw: resample outside two sigma.
  double truncated_normal(double stddev) {
    for (;;) {
      double z = normal();
      if (z >= -2.0 && z <= 2.0) return z * stddev;
    }
  }
};

}  // namespace uav
