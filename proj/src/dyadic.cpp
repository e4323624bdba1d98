#include "nestwalk/dyadic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "nestwalk/errors.hpp"

namespace nestwalk {

namespace {

constexpr std::int64_t kNoBreakpoint = std::numeric_limits<std::int64_t>::max();

std::int64_t pow2(int e) {
  if (e < 0 || e > 62) throw std::overflow_error("power of two out of range: " + std::to_string(e));
  return std::int64_t{1} << e;
}

Rational scale_down(const Rational& r, int shift) { return r / Rational(pow2(shift)); }

Rational scale_up(const Rational& r, int shift) { return r * Rational(pow2(shift)); }

void check_breakpoints(std::span<const std::int64_t> times, std::size_t n_values, const char* what) {
  if (times.empty()) throw DomainError(std::string(what) + ": no breakpoints");
  if (times.size() != n_values) throw DomainError(std::string(what) + ": times and values differ in length");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) throw DomainError(std::string(what) + ": breakpoints not strictly increasing");
  }
}

/// Fraction num/den with den > 0; cheap carrier for interpolated values.
struct Frac {
  __int128 num;
  __int128 den;
};

/// Walks the breakpoints of one operand in a common (scaled) time unit.
struct Cursor {
  std::span<const std::int64_t> t;
  std::span<const std::int64_t> v;
  std::int64_t tmul;
  std::int64_t vmul;
  std::size_t seg = 0;
  std::size_t next = 1;

  [[nodiscard]] std::int64_t time(std::size_t i) const { return t[i] * tmul; }

  void seek(std::int64_t x) {
    while (seg + 1 < t.size() && time(seg + 1) <= x) ++seg;
    if (next <= seg) next = seg + 1;
    while (next < t.size() && time(next) <= x) ++next;
  }

  [[nodiscard]] std::int64_t next_time() const { return next < t.size() ? time(next) : kNoBreakpoint; }

  [[nodiscard]] Frac linear(std::int64_t x) const {
    std::int64_t t0 = time(seg);
    if (x == t0) return {static_cast<__int128>(v[seg]) * vmul, 1};
    std::int64_t t1 = time(seg + 1);
    __int128 num = static_cast<__int128>(v[seg]) * vmul * (t1 - x) + static_cast<__int128>(v[seg + 1]) * vmul * (x - t0);
    return {num, t1 - t0};
  }

  [[nodiscard]] Frac step(std::int64_t /*x*/) const { return {static_cast<__int128>(v[seg]) * vmul, 1}; }

  [[nodiscard]] std::optional<Frac> step_left_limit(std::int64_t x) const {
    if (seg > 0 && time(seg) == x) return Frac{static_cast<__int128>(v[seg - 1]) * vmul, 1};
    return std::nullopt;
  }
};

/// Running exact maximum of |a - b| with a cheap floating-point prefilter.
class SupTracker {
 public:
  void offer(const Frac& a, const Frac& b) {
    if (a.den == 1 && b.den == 1) {
      __int128 diff = a.num - b.num;
      if (diff < 0) diff = -diff;
      constexpr __int128 kSafe = static_cast<__int128>(1) << 62;
      if (diff < kSafe) {
        if (diff * best_.den() <= best_.num()) return;
        best_ = Rational::from_wide(diff, 1);
        best_approx_ = best_.to_double();
        return;
      }
    }
    __int128 num = a.num * b.den - b.num * a.den;
    if (num < 0) num = -num;
    __int128 den = a.den * b.den;
    double approx = static_cast<double>(num) / static_cast<double>(den);
    if (approx < best_approx_ * (1.0 - 1e-9)) return;
    Rational r = Rational::from_wide(num, den);
    if (r > best_) {
      best_ = r;
      best_approx_ = r.to_double();
    }
  }
  [[nodiscard]] const Rational& best() const { return best_; }

 private:
  Rational best_{0};
  double best_approx_ = 0.0;
};

struct Alignment {
  int time_shift;
  int value_shift;
  std::int64_t horizon;
};

Alignment align(int ats, int avs, int bts, int bvs, const DyadicRational& horizon) {
  if (horizon.numerator < 0) throw DomainError("negative horizon");
  Alignment al{};
  al.time_shift = std::max({ats, bts, horizon.log2_denominator});
  al.value_shift = std::max(avs, bvs);
  al.horizon = horizon.in_units(al.time_shift);
  return al;
}

template <bool kStep>
Rational sup_impl(Cursor a, Cursor b, std::int64_t b_end, const Alignment& al) {
  const std::int64_t h = al.horizon;
  if (a.time(0) != 0 || b.time(0) != 0) throw DomainError("sup_distance: functions must start at time 0");
  if (a.time(a.t.size() - 1) < h) throw DomainError("sup_distance: horizon exceeds the first operand's domain");
  if (b_end < h) throw DomainError("sup_distance: horizon exceeds the second operand's domain");

  SupTracker sup;
  std::int64_t x = 0;
  for (;;) {
    a.seek(x);
    b.seek(x);
    Frac fa = a.linear(x);
    if constexpr (kStep) {
      sup.offer(fa, b.step(x));
      if (auto left = b.step_left_limit(x)) sup.offer(fa, *left);
    } else {
      sup.offer(fa, b.linear(x));
    }
    if (x == h) break;
    x = std::min({a.next_time(), b.next_time(), h});
  }
  return scale_down(sup.best(), al.value_shift);
}

}  // namespace

DyadicPath path_from_steps(Level level, std::span<const std::int8_t> steps) {
  DyadicPath p{level, {}};
  p.values.resize(steps.size() + 1);
  p.values[0] = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) p.values[i + 1] = p.values[i] + steps[i];
  return p;
}

MicroClock::MicroClock(Level fine_level, std::int64_t ticks_per_fine_step)
    : fine_level_(fine_level), ticks_(ticks_per_fine_step) {
  if (fine_level.m < 0) throw UsageError("fine level must be non-negative");
  if (ticks_ < 1 || !std::has_single_bit(static_cast<std::uint64_t>(ticks_))) {
    throw UsageError("ticks per fine step must be a positive power of two, got " + std::to_string(ticks_));
  }
}

int MicroClock::tick_shift() const {
  return fine_level_.time_shift() + std::countr_zero(static_cast<std::uint64_t>(ticks_));
}

TimeChange::TimeChange(MicroClock clock, std::vector<std::int64_t> durations)
    : clock_(clock), durations_(std::move(durations)) {
  cumulative_.resize(durations_.size() + 1);
  cumulative_[0] = 0;
  for (std::size_t i = 0; i < durations_.size(); ++i) {
    if (durations_[i] < 1) {
      throw DomainError("time change duration " + std::to_string(i) + " is " + std::to_string(durations_[i]) +
                        "; every fine step must last at least one micro-tick");
    }
    cumulative_[i + 1] = cumulative_[i] + durations_[i];
  }
}

TimeChange TimeChange::identity(MicroClock clock, std::int64_t fine_steps) {
  return {clock, std::vector<std::int64_t>(static_cast<std::size_t>(fine_steps), clock.ticks_per_fine_step())};
}

Rational TimeChange::intrinsic_at(const Rational& real_ticks) const {
  if (real_ticks < Rational(0) || real_ticks > Rational(total_real_ticks())) {
    throw DomainError("time " + real_ticks.str() + " outside the time change domain");
  }
  std::int64_t whole = real_ticks.floor();
  // index of the last cumulative mark <= t
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), whole);
  auto i = static_cast<std::int64_t>(it - cumulative_.begin()) - 1;
  const std::int64_t u = clock_.ticks_per_fine_step();
  if (i >= fine_steps()) return Rational(total_intrinsic_ticks());
  Rational into = real_ticks - Rational(cumulative_[static_cast<std::size_t>(i)]);
  return Rational(i * u) + into * Rational(u, durations_[static_cast<std::size_t>(i)]);
}

PiecewiseLinear TimeChange::as_function() const {
  std::vector<std::int64_t> values(cumulative_.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<std::int64_t>(i) * clock_.ticks_per_fine_step();
  }
  return {cumulative_, std::move(values), clock_.tick_shift(), clock_.tick_shift()};
}

std::optional<Rational> quasi_inverse(const TimeChange& c, const Rational& intrinsic_ticks) {
  if (intrinsic_ticks < Rational(0)) throw DomainError("quasi_inverse: negative intrinsic time");
  if (intrinsic_ticks > Rational(c.total_intrinsic_ticks())) return std::nullopt;
  const std::int64_t u = c.clock().ticks_per_fine_step();
  std::int64_t i = (intrinsic_ticks / Rational(u)).floor();
  auto cum = c.cumulative();
  if (i >= c.fine_steps()) return Rational(cum.back());
  Rational rem = intrinsic_ticks - Rational(i * u);
  auto idx = static_cast<std::size_t>(i);
  return Rational(cum[idx]) + rem * Rational(c.durations()[idx], u);
}

PiecewiseLinear::PiecewiseLinear(std::vector<std::int64_t> times, std::vector<std::int64_t> values, int time_shift,
                                 int value_shift)
    : times_(std::move(times)), values_(std::move(values)), time_shift_(time_shift), value_shift_(value_shift) {
  check_breakpoints(times_, values_.size(), "piecewise-linear function");
}

Rational PiecewiseLinear::end_time() const { return scale_down(Rational(times_.back()), time_shift_); }

Rational PiecewiseLinear::at(const Rational& t) const {
  Rational x = scale_up(t, time_shift_);
  if (x < Rational(times_.front()) || x > Rational(times_.back())) {
    throw DomainError("evaluation time " + t.str() + " outside the function domain");
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), x.floor());
  auto i = static_cast<std::size_t>(it - times_.begin()) - 1;
  if (i + 1 >= times_.size() || x == Rational(times_[i])) return scale_down(Rational(values_[i]), value_shift_);
  Rational frac = (x - Rational(times_[i])) / Rational(times_[i + 1] - times_[i]);
  Rational v = Rational(values_[i]) + frac * Rational(values_[i + 1] - values_[i]);
  return scale_down(v, value_shift_);
}

StepFunction::StepFunction(std::vector<std::int64_t> times, std::vector<std::int64_t> values, std::int64_t domain_end,
                           int time_shift, int value_shift)
    : times_(std::move(times)),
      values_(std::move(values)),
      domain_end_(domain_end),
      time_shift_(time_shift),
      value_shift_(value_shift) {
  check_breakpoints(times_, values_.size(), "step function");
  if (domain_end_ < times_.back()) throw DomainError("step function: domain ends before its last jump");
}

Rational StepFunction::at(const Rational& t) const {
  Rational x = scale_up(t, time_shift_);
  if (x < Rational(times_.front()) || x > Rational(domain_end_)) {
    throw DomainError("evaluation time " + t.str() + " outside the step function domain");
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), x.floor());
  auto i = static_cast<std::size_t>(it - times_.begin()) - 1;
  return scale_down(Rational(values_[i]), value_shift_);
}

PiecewiseLinear to_function(const DyadicPath& path) {
  std::vector<std::int64_t> times(path.values.size());
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<std::int64_t>(k);
  return {std::move(times), path.values, path.level.time_shift(), path.level.space_shift()};
}

TimeChangedPath::TimeChangedPath(DyadicPath fine_walk, TimeChange clock)
    : walk_(std::move(fine_walk)), clock_(std::move(clock)) {
  if (walk_.level != clock_.clock().fine_level()) throw DomainError("walk level differs from the clock's fine level");
  if (walk_.steps() != clock_.fine_steps()) {
    throw DomainError("walk has " + std::to_string(walk_.steps()) + " steps but the time change has " +
                      std::to_string(clock_.fine_steps()));
  }
}

PiecewiseLinear TimeChangedPath::as_function() const {
  auto cum = clock_.cumulative();
  return {std::vector<std::int64_t>(cum.begin(), cum.end()), walk_.values, clock_.clock().tick_shift(),
          walk_.level.space_shift()};
}

Rational sup_distance(const PiecewiseLinear& a, const PiecewiseLinear& b, const DyadicRational& horizon) {
  Alignment al = align(a.time_shift(), a.value_shift(), b.time_shift(), b.value_shift(), horizon);
  Cursor ca{a.times(), a.values(), pow2(al.time_shift - a.time_shift()), pow2(al.value_shift - a.value_shift())};
  Cursor cb{b.times(), b.values(), pow2(al.time_shift - b.time_shift()), pow2(al.value_shift - b.value_shift())};
  return sup_impl<false>(ca, cb, cb.time(cb.t.size() - 1), al);
}

Rational sup_distance(const PiecewiseLinear& a, const StepFunction& b, const DyadicRational& horizon) {
  Alignment al = align(a.time_shift(), a.value_shift(), b.time_shift(), b.value_shift(), horizon);
  Cursor ca{a.times(), a.values(), pow2(al.time_shift - a.time_shift()), pow2(al.value_shift - a.value_shift())};
  Cursor cb{b.times(), b.values(), pow2(al.time_shift - b.time_shift()), pow2(al.value_shift - b.value_shift())};
  return sup_impl<true>(ca, cb, b.domain_end() * cb.tmul, al);
}

Rational sup_distance(const DyadicPath& a, const DyadicPath& b, const DyadicRational& horizon) {
  return sup_distance(to_function(a), to_function(b), horizon);
}

}  // namespace nestwalk
