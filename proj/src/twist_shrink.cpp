#include "nestwalk/twist_shrink.hpp"

#include <cmath>
#include <string>

#include "nestwalk/errors.hpp"
#include "nestwalk/rng.hpp"

namespace nestwalk {

namespace {

// 4 GiB of int8 steps across the whole matrix.
constexpr long double kStepBudget = 4294967296.0L;

long double nominal_steps(Level m, const DyadicRational& horizon) {
  return horizon.to_double() * std::ldexp(1.0L, 2 * m.m);
}

}  // namespace

StepMatrix::StepMatrix(std::uint64_t seed, Level m_fine, DyadicRational horizon,
                       std::vector<std::vector<std::int8_t>> rows)
    : seed_(seed), m_fine_(m_fine), horizon_(horizon), rows_(std::move(rows)) {}

std::int64_t horizon_steps(Level m, const DyadicRational& horizon) {
  return static_cast<std::int64_t>(std::ceil(nominal_steps(m, horizon)));
}

std::int64_t row_length(Level m, const DyadicRational& horizon) {
  long double n = std::ceil(1.5L * nominal_steps(m, horizon)) + 16.0L * std::ldexp(1.0L, m.m) + 64.0L;
  if (n > kStepBudget) {
    throw ResourceError("step row " + std::to_string(m.m) + " requires " + std::to_string(static_cast<double>(n)) +
                        " steps, above the budget");
  }
  return static_cast<std::int64_t>(n);
}

StepMatrix generate_step_matrix(std::uint64_t seed, Level m_fine, const DyadicRational& horizon) {
  if (m_fine.m < 1) throw UsageError("m_fine must be at least 1");
  if (horizon.numerator <= 0) throw UsageError("horizon must be positive");
  if (m_fine.m > 20) throw ResourceError("m_fine " + std::to_string(m_fine.m) + " exceeds the step budget");
  long double total = 0;
  for (int m = 0; m <= m_fine.m; ++m) {
    total += std::ceil(1.5L * nominal_steps(Level(m), horizon)) + 16.0L * std::ldexp(1.0L, m) + 64.0L;
  }
  if (total > kStepBudget) {
    throw ResourceError("step matrix requires " + std::to_string(static_cast<double>(total)) +
                        " steps, above the budget of " + std::to_string(static_cast<double>(kStepBudget)));
  }

  std::vector<std::vector<std::int8_t>> rows(static_cast<std::size_t>(m_fine.m) + 1);
  for (int m = 0; m <= m_fine.m; ++m) {
    auto n = static_cast<std::size_t>(row_length(Level(m), horizon));
    CounterStream stream(derive(seed, Tag::step_row, static_cast<std::uint64_t>(m)));
    auto& row = rows[static_cast<std::size_t>(m)];
    row.resize(n);
    for (std::size_t w = 0; w * 64 < n; ++w) {
      std::uint64_t bits = stream.at(w);
      std::size_t end = std::min(n, (w + 1) * 64);
      for (std::size_t j = w * 64; j < end; ++j, bits >>= 1) row[j] = (bits & 1U) != 0 ? 1 : -1;
    }
  }
  return {seed, m_fine, horizon, std::move(rows)};
}

StoppingSequence even_crossing_times(std::span<const std::int8_t> steps, Level level) {
  StoppingSequence seq;
  seq.level = level;
  seq.unit = TimeUnit::level_steps;
  seq.origin = StopOrigin::even_crossing;
  seq.times.reserve(steps.size() / 4 + 2);
  std::int64_t offset = 0;  // S(n) - S(T(k))
  for (std::size_t n = 0; n < steps.size(); ++n) {
    int s = steps[n];
    if (s != 1 && s != -1) throw DomainError("step " + std::to_string(n) + " is not +-1");
    offset += s;
    if (offset == 2 || offset == -2) {
      seq.times.push_back(static_cast<std::int64_t>(n) + 1);
      offset = 0;
    }
  }
  seq.truncated = seq.times.back() != static_cast<std::int64_t>(steps.size());
  return seq;
}

std::vector<std::int8_t> twist(std::span<const std::int8_t> parent_twisted, std::span<const std::int8_t> raw_row,
                               const StoppingSequence& crossings) {
  auto bridges = static_cast<std::size_t>(crossings.count());
  std::size_t usable = std::min(bridges, parent_twisted.size());
  auto end = static_cast<std::size_t>(crossings.times[usable]);
  if (end > raw_row.size()) throw ConsistencyError("crossing times run past the raw row");
  std::vector<std::int8_t> out(end);
  for (std::size_t k = 0; k < usable; ++k) {
    auto lo = static_cast<std::size_t>(crossings.times[k]);
    auto hi = static_cast<std::size_t>(crossings.times[k + 1]);
    int offset = 0;
    for (std::size_t n = lo; n < hi; ++n) {
      offset += raw_row[n];
      if (n + 1 < hi && (offset == 2 || offset == -2)) {
        throw ConsistencyError("bridge " + std::to_string(k) + " reaches +-2 before its crossing time");
      }
    }
    if (offset != 2 && offset != -2) {
      throw ConsistencyError("bridge " + std::to_string(k) + " has increment " + std::to_string(offset));
    }
    const bool keep = offset == 2 * parent_twisted[k];
    for (std::size_t n = lo; n < hi; ++n) {
      out[n] = keep ? raw_row[n] : static_cast<std::int8_t>(-raw_row[n]);
    }
  }
  return out;
}

bool NestedWalkFamily::truncated() const {
  const DyadicRational& k = matrix.horizon();
  for (std::size_t m = 0; m < shrunken.size(); ++m) {
    if (shrunken[m].steps() < horizon_steps(Level(static_cast<int>(m)), k)) return true;
  }
  return false;
}

NestedWalkFamily build_nested(std::uint64_t seed, Level m_fine, const DyadicRational& horizon) {
  StepMatrix matrix = generate_step_matrix(seed, m_fine, horizon);
  const auto levels = static_cast<std::size_t>(m_fine.m) + 1;
  std::vector<std::vector<std::int8_t>> twisted(levels);
  std::vector<StoppingSequence> crossings(levels);
  std::vector<DyadicPath> shrunken(levels);

  auto row0 = matrix.row(0);
  twisted[0].assign(row0.begin(), row0.end());
  crossings[0].level = Level(0);
  crossings[0].unit = TimeUnit::level_steps;
  shrunken[0] = path_from_steps(Level(0), twisted[0]);

  for (std::size_t m = 1; m < levels; ++m) {
    Level lv(static_cast<int>(m));
    crossings[m] = even_crossing_times(matrix.row(lv.m), lv);
    twisted[m] = twist(twisted[m - 1], matrix.row(lv.m), crossings[m]);
    shrunken[m] = path_from_steps(lv, twisted[m]);
  }
  return {std::move(matrix), std::move(twisted), std::move(crossings), std::move(shrunken)};
}

}  // namespace nestwalk
