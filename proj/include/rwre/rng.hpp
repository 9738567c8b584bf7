#pragma once

#include <cstdint>
#include <random>

namespace rwre {

/// splitmix64 finalizer. Used as a counter-based hash so that per-site and
/// per-sample random streams are pure functions of (seed, index).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `stream`, index `index` of a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(mix64(master) ^ stream) ^ index);
}

/// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Stream tags keep the site field, sample paths and replicate seeds disjoint.
inline constexpr std::uint64_t kSiteStream = 0x5173'0001ULL;
inline constexpr std::uint64_t kPathStream = 0x5173'0002ULL;
inline constexpr std::uint64_t kReplicateStream = 0x5173'0003ULL;

/// Uniform variate attached to lattice site x under a master seed.
constexpr double site_uniform(std::uint64_t seed, std::int64_t x) noexcept {
  return open_unit(derive_seed(seed, kSiteStream, static_cast<std::uint64_t>(x)));
}

/// Independent engine for Monte Carlo sample `index`.
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(derive_seed(seed, kPathStream, index));
}

/// Environment seed for replicate `r` of an experiment.
constexpr std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t r) noexcept {
  return derive_seed(master, kReplicateStream, r);
}

}  // namespace rwre
