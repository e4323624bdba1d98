#pragma once

// Exact dyadic representations of paths, time changes and stopping
// sequences, plus the sup-distance between piecewise-linear functions.
//
// Nothing here touches floating point: path values are integers in space
// units 2^{-m}, times are integers in 2^{-2m} (or micro-tick) units, and
// derived quantities are exact Rationals.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nestwalk/rational.hpp"

namespace nestwalk {

/// Refinement level m: time step 2^{-2m}, space step 2^{-m}.
struct Level {
  int m = 0;

  constexpr Level() = default;
  constexpr explicit Level(int level) : m(level) {}

  [[nodiscard]] constexpr int space_shift() const { return m; }
  [[nodiscard]] constexpr int time_shift() const { return 2 * m; }

  friend constexpr auto operator<=>(const Level&, const Level&) = default;
};

/// Walk on the level-m grid: the value at time k 2^{-2m} is values[k] 2^{-m},
/// linear in between.
struct DyadicPath {
  Level level;
  std::vector<std::int64_t> values;

  /// Number of grid steps covered (values.size() - 1).
  [[nodiscard]] std::int64_t steps() const { return static_cast<std::int64_t>(values.size()) - 1; }
};

/// Partial sums of a +-1 step sequence, starting at 0.
DyadicPath path_from_steps(Level level, std::span<const std::int8_t> steps);

/// Fine time grid subdivided into micro-ticks so that non-uniform time
/// changes stay integral. One fine step 2^{-2 m_fine} is `ticks_per_fine_step`
/// micro-ticks; that count must be a power of two.
class MicroClock {
 public:
  explicit MicroClock(Level fine_level, std::int64_t ticks_per_fine_step = 4);

  [[nodiscard]] Level fine_level() const { return fine_level_; }
  [[nodiscard]] std::int64_t ticks_per_fine_step() const { return ticks_; }
  /// log2 of micro-ticks per unit of real time.
  [[nodiscard]] int tick_shift() const;

 private:
  Level fine_level_;
  std::int64_t ticks_;
};

class PiecewiseLinear;

/// Strictly increasing piecewise-linear clock C. Fine step i (1-based)
/// consumes durations[i-1] micro-ticks of real time and exactly
/// ticks_per_fine_step micro-ticks of intrinsic time. C plays the role of the
/// quadratic variation of the generated martingale.
class TimeChange {
 public:
  TimeChange(MicroClock clock, std::vector<std::int64_t> durations);

  /// Every fine step takes exactly one fine step of real time.
  static TimeChange identity(MicroClock clock, std::int64_t fine_steps);

  [[nodiscard]] const MicroClock& clock() const { return clock_; }
  [[nodiscard]] std::span<const std::int64_t> durations() const { return durations_; }
  /// cumulative()[i] is the real time (micro-ticks) at which fine step i ends.
  [[nodiscard]] std::span<const std::int64_t> cumulative() const { return cumulative_; }
  [[nodiscard]] std::int64_t fine_steps() const { return static_cast<std::int64_t>(durations_.size()); }
  [[nodiscard]] std::int64_t total_real_ticks() const { return cumulative_.back(); }
  [[nodiscard]] std::int64_t total_intrinsic_ticks() const {
    return fine_steps() * clock_.ticks_per_fine_step();
  }

  /// C(t): intrinsic micro-ticks consumed by real time t (micro-ticks).
  [[nodiscard]] Rational intrinsic_at(const Rational& real_ticks) const;

  /// C as a function of real time: breakpoints at cumulative(), values in
  /// intrinsic micro-ticks, both in real units via the clock's tick shift.
  [[nodiscard]] PiecewiseLinear as_function() const;

 private:
  MicroClock clock_;
  std::vector<std::int64_t> durations_;
  std::vector<std::int64_t> cumulative_;
};

/// T_s = inf{t : C(t) > s} for s in intrinsic micro-ticks, returned in real
/// micro-ticks. std::nullopt stands for +infinity (s past the end of C).
std::optional<Rational> quasi_inverse(const TimeChange& c, const Rational& intrinsic_ticks);

enum class TimeUnit { level_steps, fine_steps, micro_ticks };
enum class StopOrigin { even_crossing, skorohod_wiener, skorohod_martingale };

/// Crossing times T(0) = 0 < T(1) < ... as exact integer stamps.
/// times[k] is T(k); times[0] is always 0.
struct StoppingSequence {
  Level level;
  TimeUnit unit = TimeUnit::fine_steps;
  StopOrigin origin = StopOrigin::even_crossing;
  std::vector<std::int64_t> times{0};
  /// Set when the underlying path ran out before the next crossing.
  bool truncated = false;

  /// Number of crossings recorded (excludes T(0)).
  [[nodiscard]] std::int64_t count() const { return static_cast<std::int64_t>(times.size()) - 1; }
};

/// Continuous piecewise-linear function. Breakpoint i sits at real time
/// times[i] 2^{-time_shift} with value values[i] 2^{-value_shift}.
class PiecewiseLinear {
 public:
  PiecewiseLinear(std::vector<std::int64_t> times, std::vector<std::int64_t> values, int time_shift,
                  int value_shift);

  [[nodiscard]] std::span<const std::int64_t> times() const { return times_; }
  [[nodiscard]] std::span<const std::int64_t> values() const { return values_; }
  [[nodiscard]] int time_shift() const { return time_shift_; }
  [[nodiscard]] int value_shift() const { return value_shift_; }
  [[nodiscard]] Rational end_time() const;

  /// Exact value at real time t.
  [[nodiscard]] Rational at(const Rational& t) const;

 private:
  std::vector<std::int64_t> times_;
  std::vector<std::int64_t> values_;
  int time_shift_;
  int value_shift_;
};

/// Right-continuous piecewise-constant function: values[i] on
/// [times[i], times[i+1]), the last value holding until domain_end.
class StepFunction {
 public:
  StepFunction(std::vector<std::int64_t> times, std::vector<std::int64_t> values, std::int64_t domain_end,
               int time_shift, int value_shift);

  [[nodiscard]] std::span<const std::int64_t> times() const { return times_; }
  [[nodiscard]] std::span<const std::int64_t> values() const { return values_; }
  [[nodiscard]] std::int64_t domain_end() const { return domain_end_; }
  [[nodiscard]] int time_shift() const { return time_shift_; }
  [[nodiscard]] int value_shift() const { return value_shift_; }

  [[nodiscard]] Rational at(const Rational& t) const;

 private:
  std::vector<std::int64_t> times_;
  std::vector<std::int64_t> values_;
  std::int64_t domain_end_;
  int time_shift_;
  int value_shift_;
};

/// Level-m walk as a function of real time.
PiecewiseLinear to_function(const DyadicPath& path);

/// M(t) = W(C(t)): the fine walk traversed on the clock C.
class TimeChangedPath {
 public:
  TimeChangedPath(DyadicPath fine_walk, TimeChange clock);

  [[nodiscard]] const DyadicPath& fine_walk() const { return walk_; }
  [[nodiscard]] const TimeChange& clock() const { return clock_; }
  /// Breakpoints at the cumulative durations; values in fine space units.
  [[nodiscard]] PiecewiseLinear as_function() const;

 private:
  DyadicPath walk_;
  TimeChange clock_;
};

/// sup_{0 <= t <= horizon} |a(t) - b(t)|, exact. Evaluated on the union of
/// breakpoints, where the supremum of a piecewise-linear difference is
/// attained. Throws DomainError if the horizon lies outside either domain.
Rational sup_distance(const PiecewiseLinear& a, const PiecewiseLinear& b, const DyadicRational& horizon);

/// Same for a continuous function against a right-continuous step function;
/// left limits at the jumps are included.
Rational sup_distance(const PiecewiseLinear& a, const StepFunction& b, const DyadicRational& horizon);

Rational sup_distance(const DyadicPath& a, const DyadicPath& b, const DyadicRational& horizon);

}  // namespace nestwalk
