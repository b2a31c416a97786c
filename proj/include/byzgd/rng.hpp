#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace byzgd {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from (master seed, purpose tag, id).
/// The mapping is a fixed hash, so the same triple yields the same stream
/// regardless of the order in which streams are created.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t id = 0);

inline Rng make_rng(std::uint64_t master, std::string_view tag, std::uint64_t id = 0) {
  return Rng(derive_seed(master, tag, id));
}

}  // namespace byzgd
