#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace ubct {

/// Counter-based 64-bit generator.
///
/// Output i of a stream with key K is `mix64(K + (i + 1) * 0x9E3779B97F4A7C15)`,
/// where mix64 is the SplitMix64 finalizer. Substreams derive a new key from
/// (key, tag), so independent pipeline stages never share draws. Satisfies
/// UniformRandomBitGenerator and can drive the <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  Rng substream(std::uint64_t tag) const { return Rng(mix64(key_ ^ mix64(tag + kGolden))); }
  Rng substream(std::string_view tag) const { return substream(hash(tag)); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // FNV-1a
  static constexpr std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace ubct
