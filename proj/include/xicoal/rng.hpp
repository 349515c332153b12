#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace xicoal {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Seed of replicate `rep` at configuration index `cell` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) {
  return mix64(mix64(master ^ mix64(cell + 0x632BE59BD9B4E019ull)) ^ mix64(rep));
}

enum class StreamPurpose : std::uint32_t { Clock = 0, Coloring = 1, Flip = 2, Choice = 3 };

inline constexpr std::uint32_t kKingmanStreamBase = 0xFFFFFFF0u;
inline constexpr std::uint32_t kLambdaStreamBase = 0xFFFFFFE0u;

inline std::uint32_t atom_stream(std::uint32_t atom, StreamPurpose p) {
  return (atom << 2) | static_cast<std::uint32_t>(p);
}
inline std::uint32_t kingman_stream(StreamPurpose p) {
  return kKingmanStreamBase | static_cast<std::uint32_t>(p);
}
inline std::uint32_t lambda_stream(StreamPurpose p) {
  return kLambdaStreamBase | static_cast<std::uint32_t>(p);
}

// Uniform on (0,1) with 53 random bits, addressed by (seed, stream, ring, index):
// a pure function, so draws do not depend on evaluation order.
inline double stream_uniform(std::uint64_t seed, std::uint32_t stream, std::uint64_t ring,
                             std::uint64_t index) {
  const PhiloxCounter ctr = {static_cast<std::uint32_t>(index >> 1), static_cast<std::uint32_t>(ring),
                             static_cast<std::uint32_t>(ring >> 32), stream};
  const PhiloxKey key = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const PhiloxCounter out = philox4x32_10(ctr, key);
  const std::size_t w = (index & 1u) ? 2 : 0;
  const std::uint64_t bits = (static_cast<std::uint64_t>(out[w]) << 32) | out[w + 1];
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential_from_uniform(double u, double rate) { return -std::log(u) / rate; }

}  // namespace xicoal
