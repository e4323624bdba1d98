#pragma once

// Test martingales M(t) = W(C(t)): a fine walk W traversed on a clock C whose
// per-step durations are drawn from one of four laws.
//
//   G1  C(t) = t                                  (M is the walk itself)
//   G2  C(t) = f(t) for a fixed increasing map f  (Gaussian, independent increments)
//   G3  i.i.d. two-point durations, independent of W   (symmetric given the past)
//   G4  duration doubled while W < 0                   (asymmetric given the past)

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nestwalk/dyadic.hpp"

namespace nestwalk {

enum class GeneratorKind { g1_bm, g2_deterministic, g3_independent, g4_sign_dependent };

std::string_view to_string(GeneratorKind kind);
/// Accepts "g1".."g4" (case-insensitive).
GeneratorKind parse_generator(std::string_view text);

/// Continuous, strictly increasing, piecewise-linear f with f(0) = 0, given
/// by (t, f(t)) breakpoints and extended past the last one with the final slope.
class DeterministicMap {
 public:
  explicit DeterministicMap(std::vector<std::pair<Rational, Rational>> points);

  /// f(t) = t / 2.
  static DeterministicMap half_speed();
  /// Parses "t:f,t:f,..." with dyadic entries, e.g. "0:0,1/2:1/4,1:1".
  static DeterministicMap parse(const std::string& text);

  [[nodiscard]] const std::vector<std::pair<Rational, Rational>>& points() const { return points_; }
  [[nodiscard]] Rational operator()(const Rational& t) const;
  [[nodiscard]] Rational inverse(const Rational& s) const;
  [[nodiscard]] double max_slope() const;
  [[nodiscard]] std::string str() const;

 private:
  std::vector<std::pair<Rational, Rational>> points_;
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::g1_bm;
  DeterministicMap g2_map = DeterministicMap::half_speed();
  /// G3 durations are short_halves * U/2 or long_halves * U/2 micro-ticks.
  std::int64_t g3_short_halves = 1;
  std::int64_t g3_long_halves = 3;
  double g3_short_probability = 0.5;
  /// G4 duration is multiplier * U; the first applies while W >= 0.
  std::int64_t g4_multiplier_nonnegative = 1;
  std::int64_t g4_multiplier_negative = 2;
  /// Key of the G3 duration stream.
  std::uint64_t seed = 0;

  /// Upper bound on dC/dt, so that <M>_K <= rate * K.
  [[nodiscard]] double qv_rate_bound() const;
};

enum class WalkSource { direct_stream, twist_shrink };

struct AssembleOptions {
  WalkSource source = WalkSource::direct_stream;
  std::int64_t ticks_per_fine_step = 4;
  /// The walk is extended until each of these levels has enough crossings to
  /// cover <M>_K, and at least `min_coarse_crossings` of them.
  std::vector<int> coarse_levels;
  std::int64_t min_coarse_crossings = 0;
};

struct MartingaleInstance {
  TimeChangedPath path;
  GeneratorSpec spec;
  /// Real-time horizon or crossing requirement not met.
  bool truncated = false;
  /// G2 only: largest |D_i - exact f^{-1}| in micro-ticks.
  double max_quantization_error = 0.0;

  [[nodiscard]] const DyadicPath& fine_walk() const { return path.fine_walk(); }
  [[nodiscard]] const TimeChange& time_change() const { return path.clock(); }
};

/// Durations per fine step of `fine_walk` according to spec.kind. Throws
/// UsageError on invalid parameters (e.g. U/2 not an integer for G3).
TimeChange gen_durations(const GeneratorSpec& spec, const DyadicPath& fine_walk, const MicroClock& clock,
                         double* max_quantization_error = nullptr);

/// Builds the fine walk (walk stream derive(seed, fine_walk)) and attaches its
/// durations; spec.seed is replaced by derive(seed, durations) for G3.
MartingaleInstance assemble_martingale(GeneratorSpec spec, std::uint64_t seed, Level m_fine,
                                       const DyadicRational& horizon, const AssembleOptions& options = {});

}  // namespace nestwalk
