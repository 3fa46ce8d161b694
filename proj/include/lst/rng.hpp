#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lst {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit hash of a string (FNV-1a), independent of std::hash.
std::uint64_t stable_hash(std::string_view s);

/// Seed for an independent stream identified by (master, tag, sample, index).
/// Streams for different samples never share state, so per-sample work gives
/// identical results whether it runs serially or in parallel.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::string_view sample_id,
                          std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view tag, std::string_view sample_id,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, sample_id, index));
}

/// Beta(a, b) draw via two gamma variates.
double sample_beta(Rng& rng, double a, double b);

double uniform(Rng& rng, double lo, double hi);

}  // namespace lst
