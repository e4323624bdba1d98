#include "nestwalk/generators.hpp"

#include <algorithm>
#include <numeric>
#include <cctype>
#include <cmath>
#include <sstream>

#include "nestwalk/errors.hpp"
#include "nestwalk/rng.hpp"
#include "nestwalk/twist_shrink.hpp"

namespace nestwalk {

namespace {

/// Level-`coarse` crossings of a fine walk, counted without storing them.
std::int64_t count_crossings(const DyadicPath& walk, int coarse) {
  const std::int64_t band = std::int64_t{1} << (walk.level.m - coarse);
  std::int64_t base = 0;
  std::int64_t count = 0;
  for (std::int64_t v : walk.values) {
    if (v - base == band || base - v == band) {
      ++count;
      base = v;
    }
  }
  return count;
}

DyadicPath direct_walk(std::uint64_t seed, Level fine, std::int64_t steps) {
  const CounterStream stream(derive(seed, Tag::fine_walk, 0));
  DyadicPath p{fine, {}};
  p.values.resize(static_cast<std::size_t>(steps) + 1);
  p.values[0] = 0;
  for (std::int64_t w = 0; w * 64 < steps; ++w) {
    std::uint64_t bits = stream.at(static_cast<std::uint64_t>(w));
    std::int64_t end = std::min(steps, (w + 1) * 64);
    for (std::int64_t j = w * 64; j < end; ++j, bits >>= 1) {
      auto idx = static_cast<std::size_t>(j);
      p.values[idx + 1] = p.values[idx] + ((bits & 1U) != 0 ? 1 : -1);
    }
  }
  return p;
}

std::vector<std::int64_t> g2_durations(const DeterministicMap& f, std::int64_t steps, const MicroClock& clock,
                                       double& max_error) {
  const int fine_shift = clock.fine_level().time_shift();
  const Rational ticks_per_unit(std::int64_t{1} << clock.tick_shift());
  const Rational index_per_unit(std::int64_t{1} << fine_shift);
  const auto& pts = f.points();

  std::vector<std::int64_t> out(static_cast<std::size_t>(steps));
  std::int64_t prev = 0;
  std::size_t seg = 0;
  max_error = 0.0;
  // On one segment the exact real time of step i, in micro-ticks, is (p + i q) / r.
  __int128 p = 0;
  __int128 q = 0;
  __int128 r = 1;
  std::size_t loaded = pts.size();
  for (std::int64_t i = 1; i <= steps; ++i) {
    // segment of f containing intrinsic time i 2^{-2 m_fine}
    while (seg + 2 < pts.size() && Rational(i) > pts[seg + 1].second * index_per_unit) ++seg;
    if (seg != loaded) {
      const auto& [t0, f0] = pts[seg];
      const auto& [t1, f1] = pts[seg + 1];
      const Rational slope = (t1 - t0) / (f1 - f0);
      const Rational a = (t0 - f0 * slope) * ticks_per_unit;
      const Rational b = slope / index_per_unit * ticks_per_unit;
      r = std::lcm(a.den(), b.den());
      p = static_cast<__int128>(a.num()) * (r / a.den());
      q = static_cast<__int128>(b.num()) * (r / b.den());
      loaded = seg;
    }
    const __int128 exact = p + q * i;
    const __int128 twice = 2 * exact + r;
    const __int128 den2 = 2 * r;
    auto rounded = static_cast<std::int64_t>(twice >= 0 ? twice / den2 : -((-twice + den2 - 1) / den2));
    std::int64_t cur = std::max(prev + 1, rounded);
    const double err = static_cast<double>(static_cast<__int128>(cur) * r - exact) / static_cast<double>(r);
    max_error = std::max(max_error, std::abs(err));
    out[static_cast<std::size_t>(i - 1)] = cur - prev;
    prev = cur;
  }
  return out;
}

}  // namespace

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::g1_bm:
      return "g1";
    case GeneratorKind::g2_deterministic:
      return "g2";
    case GeneratorKind::g3_independent:
      return "g3";
    case GeneratorKind::g4_sign_dependent:
      return "g4";
  }
  return "?";
}

GeneratorKind parse_generator(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "g1") return GeneratorKind::g1_bm;
  if (s == "g2") return GeneratorKind::g2_deterministic;
  if (s == "g3") return GeneratorKind::g3_independent;
  if (s == "g4") return GeneratorKind::g4_sign_dependent;
  throw UsageError("unknown generator '" + s + "' (expected g1, g2, g3 or g4)");
}

DeterministicMap::DeterministicMap(std::vector<std::pair<Rational, Rational>> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw UsageError("deterministic map needs at least two breakpoints");
  if (points_.front().first != Rational(0) || points_.front().second != Rational(0)) {
    throw UsageError("deterministic map must start at (0, 0)");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].first <= points_[i - 1].first || points_[i].second <= points_[i - 1].second) {
      throw UsageError("deterministic map must be strictly increasing");
    }
  }
}

DeterministicMap DeterministicMap::half_speed() { return DeterministicMap({{Rational(0), Rational(0)}, {Rational(1), Rational(1, 2)}}); }

DeterministicMap DeterministicMap::parse(const std::string& text) {
  std::vector<std::pair<Rational, Rational>> pts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("map breakpoint '" + item + "' is not t:f");
    try {
      pts.emplace_back(DyadicRational::parse(item.substr(0, colon)).value(),
                       DyadicRational::parse(item.substr(colon + 1)).value());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return DeterministicMap(std::move(pts));
}

Rational DeterministicMap::operator()(const Rational& t) const {
  if (t < Rational(0)) throw DomainError("deterministic map evaluated at negative time");
  std::size_t seg = 0;
  while (seg + 2 < points_.size() && t > points_[seg + 1].first) ++seg;
  const auto& [t0, f0] = points_[seg];
  const auto& [t1, f1] = points_[seg + 1];
  return f0 + (t - t0) * (f1 - f0) / (t1 - t0);
}

Rational DeterministicMap::inverse(const Rational& s) const {
  if (s < Rational(0)) throw DomainError("deterministic map inverted at a negative value");
  std::size_t seg = 0;
  while (seg + 2 < points_.size() && s > points_[seg + 1].second) ++seg;
  const auto& [t0, f0] = points_[seg];
  const auto& [t1, f1] = points_[seg + 1];
  return t0 + (s - f0) * (t1 - t0) / (f1 - f0);
}

double DeterministicMap::max_slope() const {
  double best = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    best = std::max(best, ((points_[i].second - points_[i - 1].second) / (points_[i].first - points_[i - 1].first)).to_double());
  }
  return best;
}

std::string DeterministicMap::str() const {
  std::string out;
  for (const auto& [t, f] : points_) {
    if (!out.empty()) out += ',';
    out += t.str() + ':' + f.str();
  }
  return out;
}

double GeneratorSpec::qv_rate_bound() const {
  switch (kind) {
    case GeneratorKind::g1_bm:
      return 1.0;
    case GeneratorKind::g2_deterministic:
      return g2_map.max_slope();
    case GeneratorKind::g3_independent:
      return 2.0 / static_cast<double>(std::min(g3_short_halves, g3_long_halves));
    case GeneratorKind::g4_sign_dependent:
      return 1.0 / static_cast<double>(std::min(g4_multiplier_nonnegative, g4_multiplier_negative));
  }
  return 1.0;
}

TimeChange gen_durations(const GeneratorSpec& spec, const DyadicPath& fine_walk, const MicroClock& clock,
                         double* max_quantization_error) {
  if (fine_walk.level != clock.fine_level()) throw UsageError("walk level differs from the clock's fine level");
  const std::int64_t u = clock.ticks_per_fine_step();
  const std::int64_t n = fine_walk.steps();
  std::vector<std::int64_t> d(static_cast<std::size_t>(n));
  if (max_quantization_error != nullptr) *max_quantization_error = 0.0;

  switch (spec.kind) {
    case GeneratorKind::g1_bm:
      std::fill(d.begin(), d.end(), u);
      break;
    case GeneratorKind::g2_deterministic: {
      double err = 0.0;
      d = g2_durations(spec.g2_map, n, clock, err);
      if (max_quantization_error != nullptr) *max_quantization_error = err;
      break;
    }
    case GeneratorKind::g3_independent: {
      if (u % 2 != 0) throw UsageError("G3 needs an even number of micro-ticks per fine step");
      if (spec.g3_short_halves < 1 || spec.g3_long_halves < 1) throw UsageError("G3 durations must be positive");
      if (!(spec.g3_short_probability >= 0.0 && spec.g3_short_probability <= 1.0)) {
        throw UsageError("G3 probability must lie in [0, 1]");
      }
      const CounterStream stream(derive(spec.seed, Tag::durations, 0));
      const std::int64_t half = u / 2;
      for (std::int64_t i = 0; i < n; ++i) {
        double draw = static_cast<double>(stream.at(static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
        d[static_cast<std::size_t>(i)] =
            (draw < spec.g3_short_probability ? spec.g3_short_halves : spec.g3_long_halves) * half;
      }
      break;
    }
    case GeneratorKind::g4_sign_dependent:
      if (spec.g4_multiplier_nonnegative < 1 || spec.g4_multiplier_negative < 1) {
        throw UsageError("G4 multipliers must be positive");
      }
      for (std::int64_t i = 0; i < n; ++i) {
        d[static_cast<std::size_t>(i)] =
            (fine_walk.values[static_cast<std::size_t>(i)] >= 0 ? spec.g4_multiplier_nonnegative
                                                                 : spec.g4_multiplier_negative) *
            u;
      }
      break;
  }
  return {clock, std::move(d)};
}

MartingaleInstance assemble_martingale(GeneratorSpec spec, std::uint64_t seed, Level m_fine,
                                       const DyadicRational& horizon, const AssembleOptions& options) {
  if (m_fine.m < 1) throw UsageError("m_fine must be at least 1");
  if (horizon.numerator <= 0) throw UsageError("horizon must be positive");
  for (int m : options.coarse_levels) {
    if (m < 0 || m > m_fine.m) throw UsageError("coarse level outside 0..m_fine");
  }
  spec.seed = derive(seed, Tag::durations, 0);
  const MicroClock clock(m_fine, options.ticks_per_fine_step);
  const std::int64_t horizon_ticks = horizon.in_units(clock.tick_shift());
  const std::int64_t nominal = horizon_steps(m_fine, horizon);

  auto covered = [&](const DyadicPath& walk, const TimeChange& c) {
    if (c.total_real_ticks() < horizon_ticks) return false;
    // B_m must be defined on [0, <M>_K]: crossings * 4^{m_fine - m} fine steps
    const Rational needed = c.intrinsic_at(Rational(horizon_ticks)) / Rational(c.clock().ticks_per_fine_step());
    for (int m : options.coarse_levels) {
      const std::int64_t crossings = count_crossings(walk, m);
      if (crossings < options.min_coarse_crossings) return false;
      if (Rational(crossings << (m_fine.time_shift() - Level(m).time_shift())) < needed) return false;
    }
    return true;
  };

  double qerr = 0.0;
  if (options.source == WalkSource::twist_shrink) {
    NestedWalkFamily family = build_nested(seed, m_fine, horizon);
    DyadicPath walk = std::move(family.shrunken[static_cast<std::size_t>(m_fine.m)]);
    TimeChange c = gen_durations(spec, walk, clock, &qerr);
    bool ok = covered(walk, c);
    return {TimeChangedPath(std::move(walk), std::move(c)), spec, !ok, qerr};
  }

  const std::int64_t cap = 64 * nominal + (std::int64_t{1} << 16);
  std::int64_t steps = nominal + nominal / 10 + 64;
  for (;;) {
    DyadicPath walk = direct_walk(seed, m_fine, steps);
    TimeChange c = gen_durations(spec, walk, clock, &qerr);
    bool ok = covered(walk, c);
    if (ok || steps >= cap) {
      return {TimeChangedPath(std::move(walk), std::move(c)), spec, !ok, qerr};
    }
    steps = std::min(cap, steps + steps / 4 + 64);
  }
}

}  // namespace nestwalk
