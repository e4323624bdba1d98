#pragma once

// Small random-instance generators for the property tests.

#include <cstdint>
#include <vector>

#include "nestwalk/dyadic.hpp"
#include "nestwalk/rng.hpp"

namespace nestwalk::testing {

inline std::vector<std::int8_t> random_steps(CounterStream& rng, std::size_t n) {
  std::vector<std::int8_t> out(n);
  for (auto& s : out) s = rng.below(2) == 0 ? std::int8_t{-1} : std::int8_t{1};
  return out;
}

inline std::vector<std::int8_t> steps_of(std::initializer_list<int> v) {
  std::vector<std::int8_t> out;
  for (int x : v) out.push_back(static_cast<std::int8_t>(x));
  return out;
}

/// Strictly increasing times starting at 0, gaps in [1, max_gap].
inline std::vector<std::int64_t> random_times(CounterStream& rng, std::size_t n, std::uint64_t max_gap) {
  std::vector<std::int64_t> t(n);
  for (std::size_t i = 1; i < n; ++i) t[i] = t[i - 1] + 1 + static_cast<std::int64_t>(rng.below(max_gap));
  return t;
}

inline std::vector<std::int64_t> random_values(CounterStream& rng, std::size_t n, std::int64_t spread) {
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * spread + 1))) - spread;
  return v;
}

}  // namespace nestwalk::testing
