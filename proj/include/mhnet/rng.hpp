#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mhnet {

using Rng = std::mt19937_64;

/// Derives an independent generator from a root seed and a purpose label,
/// e.g. stream(seed, "fold3/dropout"). Same (seed, purpose) always yields
/// the same sequence.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view purpose);
Rng make_stream(std::uint64_t seed, std::string_view purpose);

} // namespace mhnet
