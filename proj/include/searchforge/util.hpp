#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace searchforge {

// FNV-1a 64-bit. Stable across platforms; used for request fingerprints,
// stub embeddings, and synthetic content generation.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v, int width = 16);

// SplitMix64 stream. The standard <random> distributions are
// implementation-defined, so everything that must reproduce byte-identical
// output across platforms draws from this instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n); n > 0
  double unit();                         // uniform in [0, 1)
  Rng fork(std::string_view label) const;

 private:
  std::uint64_t state_;
};

std::string trim(std::string_view s);
std::string lower(std::string_view s);

// Whitespace-delimited tokens, verbatim.
std::vector<std::string> split_words(std::string_view s);
// Lowercased alphanumeric runs (splits uris and punctuation).
std::vector<std::string> split_tokens(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::size_t word_count(std::string_view s);
std::string first_words(std::string_view s, std::size_t n);

// Rough token estimate for context budgeting: ~4 bytes per token.
std::size_t estimate_tokens(std::string_view s);

// Lowercase, strip non-alphanumerics, collapse whitespace. Dedup key for
// question text.
std::string normalize_text(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace searchforge
