#include <doctest.h>

#include <sstream>

#include "nestwalk/binary_io.hpp"
#include "nestwalk/errors.hpp"

using namespace nestwalk;

TEST_CASE("family dump round trips every level") {
  const DyadicRational K{3, 1};
  const NestedWalkFamily f = build_nested(42, Level(5), K);
  std::stringstream buf;
  write_family(buf, f);
  const WalkDump d = read_dump(buf);
  CHECK(d.seed == 42);
  CHECK(d.m_fine == Level(5));
  CHECK(d.horizon.numerator == 3);
  CHECK(d.horizon.log2_denominator == 1);
  REQUIRE(d.levels.size() == 6);
  for (int m = 0; m <= 5; ++m) {
    const auto& l = d.levels[static_cast<std::size_t>(m)];
    auto raw = f.matrix.row(m);
    CHECK(l.level == Level(m));
    CHECK(std::equal(l.raw.begin(), l.raw.end(), raw.begin(), raw.end()));
    CHECK(l.twisted == f.twisted[static_cast<std::size_t>(m)]);
  }
  CHECK_FALSE(d.durations.has_value());
}

TEST_CASE("martingale dump carries the durations") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::g3_independent;
  const MartingaleInstance inst = assemble_martingale(spec, 7, Level(4), DyadicRational{1, 0});
  std::stringstream buf;
  write_martingale(buf, inst, 7, DyadicRational{1, 0});
  const WalkDump d = read_dump(buf);
  REQUIRE(d.levels.size() == 1);
  CHECK(d.levels[0].raw == d.levels[0].twisted);
  CHECK(path_from_steps(Level(4), d.levels[0].raw).values == inst.fine_walk().values);
  REQUIRE(d.durations.has_value());
  CHECK(d.durations->ticks_per_fine_step == 4);
  auto durs = inst.time_change().durations();
  CHECK(std::equal(d.durations->values.begin(), d.durations->values.end(), durs.begin(), durs.end()));
}

TEST_CASE("malformed dumps are rejected") {
  std::stringstream bad_magic("XXXX");
  CHECK_THROWS_AS(read_dump(bad_magic), DomainError);

  const NestedWalkFamily f = build_nested(1, Level(3), DyadicRational{1, 0});
  std::stringstream buf;
  write_family(buf, f);
  const std::string full = buf.str();
  std::stringstream cut(full.substr(0, full.size() - 3));
  CHECK_THROWS_AS(read_dump(cut), DomainError);

  std::string wrong_version = full;
  wrong_version[4] = 9;
  std::stringstream v(wrong_version);
  CHECK_THROWS_AS(read_dump(v), DomainError);
}
