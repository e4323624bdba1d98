#pragma once

// Skorohod-type embeddings of level-m walks into a fine path, their
// compositions across the nested family, and the discrete quadratic
// variation N_m built from the martingale crossing times.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nestwalk/dyadic.hpp"
#include "nestwalk/twist_shrink.hpp"

namespace nestwalk {

/// B_m(k 2^{-2m}) = w(s(k)): the walk read off a path at its crossing times.
struct EmbeddedWalk {
  Level level;
  StoppingSequence stop_times;
  DyadicPath values;
};

/// s(0) = 0, s(k+1) = first fine time after s(k) with |w - w(s(k))| = 2^{-m}.
/// Times are in fine steps of w. Requires m <= w.level.
StoppingSequence skorohod_times(const DyadicPath& w, Level m);

/// Values of w at the stopping times, in level-m space units.
EmbeddedWalk embedded_walk(const DyadicPath& w, const StoppingSequence& s, Level m);

/// T_{m,n} = T_n o ... o T_{m+1}, in level-n steps. Requires m < n <= m_fine.
StoppingSequence composed_times(const NestedWalkFamily& family, Level m, Level n);

/// tau(0) = 0, tau(k+1) = first real time after tau(k) with
/// |M - M(tau(k))| = 2^{-m}, in micro-ticks. Found by scanning M itself.
StoppingSequence martingale_crossing_times(const TimeChangedPath& path, Level m);

/// N_m(t) = 2^{-2m} #{r > 0 : tau(r) <= t}.
class DiscreteQV {
 public:
  DiscreteQV(StoppingSequence jump_times, MicroClock clock);

  [[nodiscard]] Level level() const { return jumps_.level; }
  [[nodiscard]] const StoppingSequence& jump_times() const { return jumps_; }

  /// #{r > 0 : tau(r) <= t} for t in micro-ticks.
  [[nodiscard]] std::int64_t count_at(const Rational& ticks) const;
  /// N_m(t) in real units of intrinsic time.
  [[nodiscard]] Rational at(const Rational& ticks) const;

  /// N_m as a step function over real time, values in intrinsic micro-ticks
  /// (same units as TimeChange::as_function), valid until domain_end ticks.
  [[nodiscard]] StepFunction as_function(std::int64_t domain_end) const;

 private:
  StoppingSequence jumps_;
  MicroClock clock_;
};

DiscreteQV discrete_qvar(const StoppingSequence& tau, const MicroClock& clock);

/// Writes rows (k, time_microticks, value_numerator, level). Times in fine
/// steps are converted with `clock`; values are path values at the stopping
/// times in level-m units. Throws ResourceError if the file cannot be written.
void write_stopping_csv(const std::filesystem::path& file, const StoppingSequence& seq,
                        const std::vector<std::int64_t>& values, const MicroClock& clock);

}  // namespace nestwalk
