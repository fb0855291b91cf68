#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpd {

// All randomness in a run flows from one root seed through named sub-streams,
// so independent stages (dataset, classifier, diffusion, distill, eval) stay
// decoupled and reproducible.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name) {
  // FNV-1a over the name, then splitmix64 finalization mixed with the root.
  std::uint64_t h = 14695981039346656037ull;
  for (char c : name) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (h | 1ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view name) {
  return std::mt19937_64(substream_seed(root, name));
}

}  // namespace dpd
