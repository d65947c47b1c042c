#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace schematik {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit FNV-1a over the bytes of `s`.
std::uint64_t hash_string(std::string_view s);

/// Seed for one pipeline stage on one page; identical inputs give identical
/// seeds on every platform.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stage,
                          std::string_view page_id = {}, std::uint64_t extra = 0);

}  // namespace schematik
