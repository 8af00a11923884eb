#pragma once
// Hashes, encodings and portable seeded randomness.
//
// Everything here must be bit-identical across platforms: golden datasets
// depend on it. std::shuffle and std::uniform_int_distribution are
// implementation-defined, so they are not used for anything persisted.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seqstory {

std::string sha256_hex(std::span<const std::byte> data);
std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::span<const std::byte> data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

/// One splitmix64 step; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a master seed with a label into an independent child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

std::string base64_encode(std::span<const std::byte> data);
std::vector<std::byte> base64_decode(std::string_view text);

/// Hex string from a cryptographic RNG. Used for bearer tokens.
std::string random_token(std::size_t bytes = 16);

using Rng = std::mt19937_64;

/// Unbiased integer in [0, n) by rejection sampling.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

/// Fisher-Yates with uniform_below.
template <typename T>
void portable_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

std::span<const std::byte> as_bytes(std::string_view s);

}  // namespace seqstory
