#include "nestwalk/embedding.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "nestwalk/errors.hpp"

namespace nestwalk {

namespace {

std::int64_t band_width(Level fine, Level m) {
  if (m.m < 0 || m.m > fine.m) {
    throw DomainError("level " + std::to_string(m.m) + " is not embeddable in a level-" + std::to_string(fine.m) +
                      " path");
  }
  return std::int64_t{1} << (fine.m - m.m);
}

/// Indices i at which values first move `band` away from the previous hit.
std::vector<std::int64_t> scan_crossings(std::span<const std::int64_t> values, std::int64_t band, bool& truncated) {
  std::vector<std::int64_t> hits{0};
  hits.reserve(values.size() / static_cast<std::size_t>(band * band) + 2);
  std::int64_t base = values.front();
  for (std::size_t i = 1; i < values.size(); ++i) {
    std::int64_t d = values[i] - base;
    if (d < 0) d = -d;
    if (d >= band) {
      if (d > band) throw DomainError("path jumps across a crossing level at index " + std::to_string(i));
      hits.push_back(static_cast<std::int64_t>(i));
      base = values[i];
    }
  }
  truncated = hits.back() != static_cast<std::int64_t>(values.size()) - 1;
  return hits;
}

}  // namespace

StoppingSequence skorohod_times(const DyadicPath& w, Level m) {
  const std::int64_t band = band_width(w.level, m);
  if (w.values.empty() || w.values.front() != 0) throw DomainError("path must start at 0");
  StoppingSequence seq;
  seq.level = m;
  seq.unit = TimeUnit::fine_steps;
  seq.origin = StopOrigin::skorohod_wiener;
  seq.times = scan_crossings(w.values, band, seq.truncated);
  return seq;
}

EmbeddedWalk embedded_walk(const DyadicPath& w, const StoppingSequence& s, Level m) {
  const std::int64_t band = band_width(w.level, m);
  DyadicPath values{m, {}};
  values.values.reserve(s.times.size());
  for (std::int64_t t : s.times) {
    if (t < 0 || t > w.steps()) throw DomainError("stopping time " + std::to_string(t) + " outside the path");
    std::int64_t v = w.values[static_cast<std::size_t>(t)];
    if (v % band != 0) throw ConsistencyError("path value at a stopping time is off the level grid");
    values.values.push_back(v / band);
  }
  return {m, s, std::move(values)};
}

StoppingSequence composed_times(const NestedWalkFamily& family, Level m, Level n) {
  if (m.m < 0 || !(m < n) || n > family.m_fine()) {
    throw DomainError("composed_times needs 0 <= m < n <= m_fine");
  }
  StoppingSequence out;
  out.level = n;
  out.unit = TimeUnit::level_steps;
  out.origin = StopOrigin::even_crossing;

  const auto& first = family.crossing_times[static_cast<std::size_t>(m.m) + 1];
  auto parent_len = static_cast<std::int64_t>(family.twisted[static_cast<std::size_t>(m.m)].size());
  std::int64_t k_max = std::min(first.count(), parent_len);
  out.truncated = first.count() < parent_len;
  out.times.assign(first.times.begin(), first.times.begin() + k_max + 1);

  for (int l = m.m + 2; l <= n.m; ++l) {
    const auto& tl = family.crossing_times[static_cast<std::size_t>(l)];
    auto usable = static_cast<std::int64_t>(std::min<std::size_t>(
        static_cast<std::size_t>(tl.count()), family.twisted[static_cast<std::size_t>(l) - 1].size()));
    std::size_t keep = 0;
    while (keep < out.times.size() && out.times[keep] <= usable) {
      out.times[keep] = tl.times[static_cast<std::size_t>(out.times[keep])];
      ++keep;
    }
    if (keep < out.times.size()) {
      out.times.resize(keep);
      out.truncated = true;
    }
  }
  return out;
}

StoppingSequence martingale_crossing_times(const TimeChangedPath& path, Level m) {
  const PiecewiseLinear fn = path.as_function();
  const std::int64_t band = band_width(path.fine_walk().level, m);
  StoppingSequence seq;
  seq.level = m;
  seq.unit = TimeUnit::micro_ticks;
  seq.origin = StopOrigin::skorohod_martingale;
  auto hits = scan_crossings(fn.values(), band, seq.truncated);
  auto times = fn.times();
  seq.times.resize(hits.size());
  std::transform(hits.begin(), hits.end(), seq.times.begin(),
                 [&](std::int64_t i) { return times[static_cast<std::size_t>(i)]; });
  return seq;
}

DiscreteQV::DiscreteQV(StoppingSequence jump_times, MicroClock clock) : jumps_(std::move(jump_times)), clock_(clock) {
  if (jumps_.unit != TimeUnit::micro_ticks) throw DomainError("discrete quadratic variation needs micro-tick times");
  if (jumps_.level > clock_.fine_level()) throw DomainError("crossing level finer than the clock");
  for (std::size_t i = 1; i < jumps_.times.size(); ++i) {
    if (jumps_.times[i] <= jumps_.times[i - 1]) throw DomainError("crossing times not strictly increasing");
  }
}

std::int64_t DiscreteQV::count_at(const Rational& ticks) const {
  if (ticks < Rational(0)) return 0;
  auto first = jumps_.times.begin() + 1;
  return static_cast<std::int64_t>(std::upper_bound(first, jumps_.times.end(), ticks.floor()) - first);
}

Rational DiscreteQV::at(const Rational& ticks) const {
  return Rational(count_at(ticks), std::int64_t{1} << jumps_.level.time_shift());
}

StepFunction DiscreteQV::as_function(std::int64_t domain_end) const {
  const std::int64_t jump = (std::int64_t{1} << (clock_.fine_level().time_shift() - jumps_.level.time_shift())) *
                            clock_.ticks_per_fine_step();
  std::vector<std::int64_t> values(jumps_.times.size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = static_cast<std::int64_t>(k) * jump;
  return {jumps_.times, std::move(values), domain_end, clock_.tick_shift(), clock_.tick_shift()};
}

DiscreteQV discrete_qvar(const StoppingSequence& tau, const MicroClock& clock) { return {tau, clock}; }

void write_stopping_csv(const std::filesystem::path& file, const StoppingSequence& seq,
                        const std::vector<std::int64_t>& values, const MicroClock& clock) {
  if (values.size() != seq.times.size()) throw DomainError("one value per stopping time required");
  std::int64_t scale = 1;
  switch (seq.unit) {
    case TimeUnit::micro_ticks:
      break;
    case TimeUnit::fine_steps:
      scale = clock.ticks_per_fine_step();
      break;
    case TimeUnit::level_steps:
      scale = (std::int64_t{1} << (clock.fine_level().time_shift() - seq.level.time_shift())) *
              clock.ticks_per_fine_step();
      break;
  }
  std::ofstream out(file);
  if (!out) throw ResourceError("cannot write " + file.string());
  out << "k,time_microticks,value_numerator,level\n";
  for (std::size_t k = 0; k < seq.times.size(); ++k) {
    out << k << ',' << seq.times[k] * scale << ',' << values[k] << ',' << seq.level.m << '\n';
  }
  if (!out) throw ResourceError("write failed for " + file.string());
}

}  // namespace nestwalk
