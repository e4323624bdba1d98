#pragma once

// Nested random-walk construction of Brownian motion ("twist and shrink").
//
// Row m of an i.i.d. +-1 matrix is a simple walk S_m. Its even-crossing
// times T_m cut it into bridges of net increment +-2; each bridge is flipped
// so that its sign agrees with step k of the already-twisted level m-1. The
// shrunken walk B~_m(t) = 2^{-m} S~_m(t 2^{2m}) then revisits every vertex
// of B~_{m-1} in order.

#include <cstdint>
#include <span>
#include <vector>

#include "nestwalk/dyadic.hpp"

namespace nestwalk {

/// Independent fair +-1 rows for levels 0..m_fine.
class StepMatrix {
 public:
  StepMatrix(std::uint64_t seed, Level m_fine, DyadicRational horizon, std::vector<std::vector<std::int8_t>> rows);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] Level m_fine() const { return m_fine_; }
  [[nodiscard]] const DyadicRational& horizon() const { return horizon_; }
  [[nodiscard]] std::span<const std::int8_t> row(int m) const { return rows_.at(static_cast<std::size_t>(m)); }
  [[nodiscard]] int levels() const { return static_cast<int>(rows_.size()); }

 private:
  std::uint64_t seed_;
  Level m_fine_;
  DyadicRational horizon_;
  std::vector<std::vector<std::int8_t>> rows_;
};

/// ceil(K 4^m): level-m steps needed to reach the horizon.
std::int64_t horizon_steps(Level m, const DyadicRational& horizon);

/// Generated length of row m: ceil(1.5 K 4^m) + 16 * 2^m + 64. The margin lets
/// coarse-level crossing times of the finest walk run past K; the additive
/// terms keep the coarse rows from running short of bridges.
std::int64_t row_length(Level m, const DyadicRational& horizon);

/// Row m is bit stream derive(seed, Tag::step_row, m); bit j set means +1.
/// Throws ResourceError if the matrix would exceed the step budget.
StepMatrix generate_step_matrix(std::uint64_t seed, Level m_fine, const DyadicRational& horizon);

/// T(0) = 0, T(k+1) = min{n > T(k) : |S(n) - S(T(k))| = 2}, in level steps.
/// The sequence is flagged truncated when the walk ends mid-bridge.
StoppingSequence even_crossing_times(std::span<const std::int8_t> steps, Level level);

/// Flips each complete bridge (T(k), T(k+1)] of raw_row whose increment is not
/// 2 * parent_twisted[k]. Output covers min(#bridges, parent length) bridges.
/// Throws ConsistencyError if `crossings` was not computed from raw_row.
std::vector<std::int8_t> twist(std::span<const std::int8_t> parent_twisted, std::span<const std::int8_t> raw_row,
                               const StoppingSequence& crossings);

struct NestedWalkFamily {
  StepMatrix matrix;
  /// twisted[m] = X~_m; twisted[0] is row 0 unchanged.
  std::vector<std::vector<std::int8_t>> twisted;
  /// crossing_times[m] = T_m in level-m steps; crossing_times[0] holds only T(0).
  std::vector<StoppingSequence> crossing_times;
  /// shrunken[m] = B~_m on the level-m grid.
  std::vector<DyadicPath> shrunken;

  [[nodiscard]] Level m_fine() const { return matrix.m_fine(); }
  /// True if some level stops short of the horizon.
  [[nodiscard]] bool truncated() const;
};

NestedWalkFamily build_nested(std::uint64_t seed, Level m_fine, const DyadicRational& horizon);

}  // namespace nestwalk
