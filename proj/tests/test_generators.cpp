#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nestwalk/errors.hpp"
#include "nestwalk/generators.hpp"
#include "support.hpp"

using namespace nestwalk;

namespace {

MartingaleInstance make(GeneratorKind kind, std::uint64_t seed, int m_fine) {
  GeneratorSpec spec;
  spec.kind = kind;
  return assemble_martingale(spec, seed, Level(m_fine), DyadicRational{1, 0});
}

}  // namespace

TEST_CASE("generator names round trip") {
  for (auto g : {GeneratorKind::g1_bm, GeneratorKind::g2_deterministic, GeneratorKind::g3_independent,
                 GeneratorKind::g4_sign_dependent}) {
    CHECK(parse_generator(to_string(g)) == g);
  }
  CHECK(parse_generator("G3") == GeneratorKind::g3_independent);
  CHECK_THROWS_AS(parse_generator("g5"), UsageError);
}

TEST_CASE("deterministic map evaluates, inverts and extends") {
  const DeterministicMap f = DeterministicMap::parse("0:0,1/2:1/4,1:1");
  CHECK(f(Rational(3, 4)) == Rational(5, 8));
  CHECK(f.inverse(Rational(5, 8)) == Rational(3, 4));
  CHECK(f(Rational(2)) == Rational(5, 2));
  CHECK(f.max_slope() == doctest::Approx(1.5));
  CHECK(DeterministicMap::half_speed()(Rational(1)) == Rational(1, 2));
  CHECK_THROWS(DeterministicMap::parse("0:0,1/2:1/2,1/4:1"));
  CHECK_THROWS(DeterministicMap::parse("0:0,1:0"));
}

TEST_CASE("sign-dependent durations double below zero") {
  const MicroClock clock(Level(1), 4);
  DyadicPath w{Level(1), {0, 1, 2, 1, 0, -1, -2}};
  GeneratorSpec spec;
  spec.kind = GeneratorKind::g4_sign_dependent;
  const TimeChange c = gen_durations(spec, w, clock);
  const std::vector<std::int64_t> expected{4, 4, 4, 4, 4, 8};
  CHECK(std::equal(c.durations().begin(), c.durations().end(), expected.begin(), expected.end()));
}

TEST_CASE("independent durations need an even tick count") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::g3_independent;
  DyadicPath w{Level(1), {0, 1, 0}};
  CHECK_THROWS_AS(gen_durations(spec, w, MicroClock(Level(1), 1)), UsageError);
  CHECK_THROWS_AS(gen_durations(spec, w, MicroClock(Level(2), 4)), UsageError);
}

TEST_CASE("independent durations are uncorrelated with the walk signs") {
  const MartingaleInstance inst = make(GeneratorKind::g3_independent, 99, 9);
  const auto& v = inst.fine_walk().values;
  const auto d = inst.time_change().durations();
  const std::size_t n = std::size_t{1} << 18;
  REQUIRE(d.size() >= n);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(v[i + 1] - v[i]);
    const double y = static_cast<double>(d[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double nn = static_cast<double>(n);
  const double rho = (sxy - sx * sy / nn) / std::sqrt((sxx - sx * sx / nn) * (syy - sy * sy / nn));
  CHECK(std::abs(rho) < 0.01);
  const auto shorts = std::count(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n), 2);
  CHECK(std::abs(static_cast<double>(shorts) / nn - 0.5) < 0.005);
}

TEST_CASE("the martingale is the walk read on the clock") {
  for (auto g : {GeneratorKind::g1_bm, GeneratorKind::g2_deterministic, GeneratorKind::g3_independent,
                 GeneratorKind::g4_sign_dependent}) {
    const MartingaleInstance inst = make(g, 4, 6);
    CHECK_FALSE(inst.truncated);
    const TimeChange& c = inst.time_change();
    CHECK(c.total_real_ticks() >= DyadicRational{1, 0}.in_units(c.clock().tick_shift()));
    CHECK(std::all_of(c.durations().begin(), c.durations().end(), [](auto x) { return x >= 1; }));
    const PiecewiseLinear m = inst.path.as_function();
    const PiecewiseLinear w = to_function(inst.fine_walk());
    const Rational ticks_per_unit(std::int64_t{1} << c.clock().tick_shift());
    CounterStream rng(derive(4, Tag::duality, static_cast<std::uint64_t>(g)));
    for (int i = 0; i < 200; ++i) {
      const Rational t(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(c.total_real_ticks()) + 1)));
      CHECK(m.at(t / ticks_per_unit) == w.at(c.intrinsic_at(t) / ticks_per_unit));
    }
  }
}

TEST_CASE("instances are reproducible from their seed") {
  const MartingaleInstance a = make(GeneratorKind::g3_independent, 12, 6);
  const MartingaleInstance b = make(GeneratorKind::g3_independent, 12, 6);
  CHECK(a.fine_walk().values == b.fine_walk().values);
  CHECK(std::equal(a.time_change().durations().begin(), a.time_change().durations().end(),
                   b.time_change().durations().begin(), b.time_change().durations().end()));
}

TEST_CASE("deterministic clock gives gaussian values") {
  // M(1) = W(1/2) ~ N(0, 1/2); Kolmogorov-Smirnov at the 0.1% level.
  const int n = 400;
  std::vector<double> x;
  for (int r = 0; r < n; ++r) {
    const MartingaleInstance inst = make(GeneratorKind::g2_deterministic, derive(3, Tag::replication, static_cast<std::uint64_t>(r)), 8);
    CHECK(inst.max_quantization_error < 1.0);
    x.push_back(inst.path.as_function().at(Rational(1)).to_double());
  }
  std::sort(x.begin(), x.end());
  double d = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-x[static_cast<std::size_t>(i)]);  // sd 1/sqrt(2)
    d = std::max({d, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - static_cast<double>(i + 1) / n)});
  }
  CHECK(d < 1.95 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("slow-below-zero clock spends more time negative") {
  const int reps = 1000;
  std::vector<double> diff;
  for (int r = 0; r < reps; ++r) {
    const MartingaleInstance inst = make(GeneratorKind::g4_sign_dependent, derive(8, Tag::replication, static_cast<std::uint64_t>(r)), 6);
    const auto& v = inst.fine_walk().values;
    const auto d = inst.time_change().durations();
    const std::int64_t horizon = DyadicRational{1, 0}.in_units(inst.time_change().clock().tick_shift());
    std::int64_t neg = 0;
    std::int64_t pos = 0;
    std::int64_t t = 0;
    for (std::size_t i = 0; i < d.size() && t < horizon; ++i) {
      const std::int64_t len = std::min(d[i], horizon - t);
      (std::min(v[i], v[i + 1]) < 0 ? neg : pos) += len;
      t += len;
    }
    diff.push_back(static_cast<double>(neg - pos) / static_cast<double>(horizon));
  }
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / reps;
  double var = 0;
  for (double x : diff) var += (x - mean) * (x - mean);
  const double se = std::sqrt(var / (reps - 1) / reps);
  CHECK(mean > 4.0 * se);
}
