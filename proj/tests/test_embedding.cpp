#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nestwalk/bounds.hpp"
#include "nestwalk/embedding.hpp"
#include "nestwalk/errors.hpp"
#include "nestwalk/generators.hpp"
#include "support.hpp"

using namespace nestwalk;
using nestwalk::testing::random_steps;
using nestwalk::testing::steps_of;

namespace {

MartingaleInstance instance(GeneratorKind kind, std::uint64_t seed, int m_fine) {
  GeneratorSpec spec;
  spec.kind = kind;
  AssembleOptions opts;
  opts.coarse_levels = {m_fine - 4};
  return assemble_martingale(spec, seed, Level(m_fine), DyadicRational{1, 0}, opts);
}

constexpr GeneratorKind kAll[] = {GeneratorKind::g1_bm, GeneratorKind::g2_deterministic, GeneratorKind::g3_independent,
                                  GeneratorKind::g4_sign_dependent};

}  // namespace

TEST_CASE("skorohod time of a two-step climb") {
  const DyadicPath w = path_from_steps(Level(1), steps_of({1, 1}));
  const StoppingSequence s = skorohod_times(w, Level(0));
  CHECK(s.times == std::vector<std::int64_t>{0, 2});
  CHECK(Rational(s.times[1], 4) == Rational(1, 2));
}

TEST_CASE("embedded walk reads values at crossings") {
  const DyadicPath w = path_from_steps(Level(2), steps_of({1, 1, -1, -1}));
  const StoppingSequence s = skorohod_times(w, Level(1));
  const EmbeddedWalk b = embedded_walk(w, s, Level(1));
  CHECK(s.times == std::vector<std::int64_t>{0, 2, 4});
  CHECK(b.values.values == std::vector<std::int64_t>{0, 1, 0});
  CHECK(b.values.level == Level(1));
}

TEST_CASE("embedded walks have unit steps and increasing times") {
  CounterStream rng(derive(21, Tag::fine_walk, 0));
  for (int trial = 0; trial < 50; ++trial) {
    const int fine = 3 + static_cast<int>(rng.below(4));
    const DyadicPath w = path_from_steps(Level(fine), random_steps(rng, 2000));
    for (int m = 0; m <= fine; ++m) {
      const StoppingSequence s = skorohod_times(w, Level(m));
      const EmbeddedWalk b = embedded_walk(w, s, Level(m));
      CHECK(std::adjacent_find(s.times.begin(), s.times.end(), std::greater_equal<>()) == s.times.end());
      for (std::size_t k = 1; k < b.values.values.size(); ++k) CHECK(std::abs(b.values.values[k] - b.values.values[k - 1]) == 1);
    }
    // the fine level embeds into itself at every step
    CHECK(skorohod_times(w, Level(fine)).count() == w.steps());
  }
}

TEST_CASE("composed crossing times are the skorohod times of the finest walk") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NestedWalkFamily f = build_nested(seed, Level(7), DyadicRational{1, 0});
    const DyadicPath& w = f.shrunken[7];
    for (int m = 0; m < 7; ++m) {
      const StoppingSequence composed = composed_times(f, Level(m), Level(7));
      const StoppingSequence s = skorohod_times(w, Level(m));
      const std::size_t common = std::min(composed.times.size(), s.times.size());
      // a finite fine walk may stop before the coarse horizon is crossed
      REQUIRE(common >= 1);
      CHECK(std::equal(composed.times.begin(), composed.times.begin() + static_cast<std::ptrdiff_t>(common), s.times.begin()));
      const auto& coarse = f.shrunken[static_cast<std::size_t>(m)].values;
      for (std::size_t k = 0; k < common && k < coarse.size(); ++k) {
        CHECK(w.values[static_cast<std::size_t>(composed.times[k])] == coarse[k] << (7 - m));
      }
    }
  }
}

TEST_CASE("martingale crossing time sums the durations") {
  const MicroClock clock(Level(1), 4);
  const TimeChangedPath p(path_from_steps(Level(1), steps_of({1, 1})), TimeChange(clock, {4, 8}));
  const StoppingSequence tau = martingale_crossing_times(p, Level(0));
  CHECK(tau.times == std::vector<std::int64_t>{0, 12});
  CHECK(skorohod_times(p.fine_walk(), Level(0)).times == std::vector<std::int64_t>{0, 2});
}

TEST_CASE("intrinsic time at tau equals the wiener crossing time for every generator") {
  for (GeneratorKind g : kAll) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const MartingaleInstance inst = instance(g, seed, 8);
      const TimeChange& c = inst.time_change();
      for (int m = 2; m <= 6; ++m) {
        const StoppingSequence tau = martingale_crossing_times(inst.path, Level(m));
        const StoppingSequence s = skorohod_times(inst.fine_walk(), Level(m));
        REQUIRE(tau.times.size() == s.times.size());
        for (std::size_t k = 0; k < tau.times.size(); ++k) {
          REQUIRE(c.intrinsic_at(Rational(tau.times[k])) == Rational(s.times[k] * 4));
        }
      }
    }
  }
}

TEST_CASE("discrete quadratic variation counts crossings") {
  const MartingaleInstance inst = instance(GeneratorKind::g3_independent, 5, 8);
  for (int m = 2; m <= 6; ++m) {
    const StoppingSequence tau = martingale_crossing_times(inst.path, Level(m));
    const DiscreteQV n = discrete_qvar(tau, inst.time_change().clock());
    for (std::size_t k = 1; k < tau.times.size(); ++k) {
      CHECK(n.at(Rational(tau.times[k])) == Rational(static_cast<std::int64_t>(k), std::int64_t{1} << (2 * m)));
      CHECK(n.count_at(Rational(tau.times[k]) - Rational(1, 2)) == static_cast<std::int64_t>(k) - 1);
    }
  }
}

TEST_CASE("crossing times nest with even index gaps") {
  for (GeneratorKind g : kAll) {
    const MartingaleInstance inst = instance(g, 8, 8);
    for (int m = 1; m < 8; ++m) {
      const auto coarse = martingale_crossing_times(inst.path, Level(m)).times;
      const auto fine = martingale_crossing_times(inst.path, Level(m + 1)).times;
      std::size_t j = 0;
      std::size_t prev = 0;
      for (std::size_t k = 0; k < coarse.size(); ++k) {
        while (j < fine.size() && fine[j] < coarse[k]) ++j;
        REQUIRE(j < fine.size());
        REQUIRE(fine[j] == coarse[k]);
        if (k > 0) {
          CHECK(j - prev >= 2);
          CHECK((j - prev) % 2 == 0);
        }
        prev = j;
      }
    }
  }
}

TEST_CASE("half-speed clock doubles the crossing spacings") {
  const MartingaleInstance inst = instance(GeneratorKind::g2_deterministic, 13, 8);
  for (int m = 2; m <= 6; ++m) {
    const auto tau = martingale_crossing_times(inst.path, Level(m)).times;
    const auto s = skorohod_times(inst.fine_walk(), Level(m)).times;
    for (std::size_t k = 1; k < tau.size(); ++k) CHECK(tau[k] - tau[k - 1] == 2 * 4 * (s[k] - s[k - 1]));
  }
}

TEST_CASE("quadratic variation error of the identity clock stays inside the envelope") {
  const int mf = 10;
  const int m = 5;
  const MicroClock clock(Level(mf), 4);
  CounterStream rng(derive(17, Tag::fine_walk, 0));
  const DyadicPath w = path_from_steps(Level(mf), random_steps(rng, std::size_t{3} << (2 * mf)));
  const TimeChangedPath p(w, TimeChange::identity(clock, w.steps()));
  const StepFunction n = discrete_qvar(martingale_crossing_times(p, Level(m)), clock).as_function(p.clock().total_real_ticks());
  const double err = sup_distance(p.clock().as_function(), n, DyadicRational{1, 0}).to_double();
  BoundQuery q;
  q.id = BoundId::qvar_a;
  q.m = m;
  q.a_m = std::exp(1.0);
  CHECK(err > 0.0);
  CHECK(err < eval_bound(q).envelope);
}

TEST_CASE("stopping sequences export as csv") {
  const MicroClock clock(Level(2), 4);
  const DyadicPath w = path_from_steps(Level(2), steps_of({1, 1, -1, -1}));
  const StoppingSequence s = skorohod_times(w, Level(1));
  const EmbeddedWalk b = embedded_walk(w, s, Level(1));
  const auto file = std::filesystem::temp_directory_path() / "nestwalk_stops_test.csv";
  write_stopping_csv(file, s, b.values.values, clock);
  std::ifstream in(file);
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == "k,time_microticks,value_numerator,level\n0,0,0,1\n1,8,1,1\n2,16,0,1\n");
  std::filesystem::remove(file);
  CHECK_THROWS_AS(write_stopping_csv("/nonexistent-dir/x.csv", s, b.values.values, clock), ResourceError);
}
