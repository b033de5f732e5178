#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catbear {

// --- deterministic randomness ---------------------------------------------
//
// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so anything that must reproduce across platforms goes through these.

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Combines a base seed with any number of stream discriminators.
template <class... Parts>
std::uint64_t derive_seed(std::uint64_t seed, Parts... parts) {
  std::uint64_t h = mix64(seed);
  ((h = mix64(h ^ static_cast<std::uint64_t>(parts))), ...);
  return h;
}

/// Unbiased draw from [0, n). n must be positive.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_below(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  shuffle(std::span<T>(items), rng);
}

// --- digests --------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);

// --- text -----------------------------------------------------------------

/// Decodes UTF-8 into code points; invalid bytes decode to themselves.
std::vector<char32_t> utf8_decode(std::string_view text);
std::string utf8_encode(char32_t cp);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// "%.<digits>f" rendering without locale surprises.
std::string format_fixed(double value, int digits);

}  // namespace catbear
