#pragma once

// Counter-based random streams.
//
// A stream is a 64-bit key; draw i of the stream is the SplitMix64 output
// function applied to key + (i + 1) * golden. Keys are derived by hashing a
// parent key with a tag and an index, so any row, replication or generator
// stream can be regenerated on its own without touching the others:
//
//   step matrix row m         derive(seed, Tag::step_row, m)
//   replication r             derive(seed, Tag::replication, r)
//   direct fine walk          derive(instance_seed, Tag::fine_walk, 0)
//   G3 durations              derive(instance_seed, Tag::durations, 0)
//   permutation shuffles      derive(test_seed, Tag::permutation, 0)

#include <cstdint>
#include <limits>

namespace nestwalk {

enum class Tag : std::uint64_t {
  step_row = 1,
  replication = 2,
  fine_walk = 3,
  durations = 4,
  permutation = 5,
  generator = 6,
  family = 7,
  duality = 8,
  independence = 9,
  hoeffding = 10,
};

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive(std::uint64_t parent, Tag tag, std::uint64_t index) {
  std::uint64_t h = mix64(parent + kGolden);
  h = mix64(h ^ (static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL));
  return mix64(h + (index + 1) * kGolden);
}

/// Satisfies UniformRandomBitGenerator; also random-access via at().
class CounterStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterStream(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  [[nodiscard]] constexpr std::uint64_t at(std::uint64_t counter) const { return mix64(key_ + (counter + 1) * kGolden); }

  constexpr result_type operator()() { return at(counter_++); }

  /// Uniform integer in [0, bound), Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t bound) {
    __uint128_t m = static_cast<__uint128_t>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<__uint128_t>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// +1 or -1 for bit `index` of the stream, i.e. bit (index % 64) of draw index / 64.
  [[nodiscard]] constexpr int sign_bit(std::uint64_t index) const {
    return ((at(index >> 6) >> (index & 63)) & 1U) != 0 ? 1 : -1;
  }

  [[nodiscard]] constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nestwalk
