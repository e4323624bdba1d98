#include "nestwalk/binary_io.hpp"

#include <array>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "nestwalk/errors.hpp"

namespace nestwalk {

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFU);
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw DomainError("dump truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

void put_steps(std::ostream& out, std::span<const std::int8_t> steps) {
  put<std::uint64_t>(out, steps.size());
  std::vector<unsigned char> packed((steps.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] > 0) packed[i / 8] = static_cast<unsigned char>(packed[i / 8] | (1U << (i % 8)));
  }
  out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

std::vector<std::int8_t> get_steps(std::istream& in) {
  auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 36)) throw DomainError("dump declares an implausible step count");
  std::vector<unsigned char> packed((n + 7) / 8);
  if (!in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()))) {
    throw DomainError("dump truncated inside a step section");
  }
  std::vector<std::int8_t> steps(n);
  for (std::size_t i = 0; i < n; ++i) steps[i] = (packed[i / 8] >> (i % 8)) & 1U ? 1 : -1;
  return steps;
}

void put_header(std::ostream& out, std::uint64_t seed, Level m_fine, const DyadicRational& horizon,
                std::uint16_t levels) {
  out.write("MWNF", 4);
  put<std::uint16_t>(out, kDumpVersion);
  put<std::uint64_t>(out, seed);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(m_fine.m));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(horizon.numerator));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(horizon.log2_denominator));
  put<std::uint16_t>(out, levels);
}

std::vector<std::int8_t> steps_of(const DyadicPath& p) {
  std::vector<std::int8_t> s(static_cast<std::size_t>(p.steps()));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<std::int8_t>(p.values[i + 1] - p.values[i]);
  return s;
}

}  // namespace

void write_family(std::ostream& out, const NestedWalkFamily& family) {
  const int levels = family.matrix.levels();
  put_header(out, family.matrix.seed(), family.m_fine(), family.matrix.horizon(), static_cast<std::uint16_t>(levels));
  for (int m = 0; m < levels; ++m) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(m));
    put_steps(out, family.matrix.row(m));
    put_steps(out, family.twisted[static_cast<std::size_t>(m)]);
  }
  if (!out) throw ResourceError("failed to write walk family dump");
}

void write_martingale(std::ostream& out, const MartingaleInstance& instance, std::uint64_t seed,
                      const DyadicRational& horizon) {
  const DyadicPath& walk = instance.fine_walk();
  put_header(out, seed, walk.level, horizon, 1);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(walk.level.m));
  auto steps = steps_of(walk);
  put_steps(out, steps);
  put_steps(out, steps);
  out.write("DURS", 4);
  const TimeChange& c = instance.time_change();
  put<std::uint64_t>(out, static_cast<std::uint64_t>(c.clock().ticks_per_fine_step()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(c.fine_steps()));
  for (std::int64_t d : c.durations()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw ResourceError("duration does not fit the dump format");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  if (!out) throw ResourceError("failed to write martingale dump");
}

WalkDump read_dump(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "MWNF", 4) != 0) throw DomainError("not a walk dump");
  auto version = get<std::uint16_t>(in);
  if (version != kDumpVersion) throw DomainError("unsupported dump version " + std::to_string(version));
  WalkDump d;
  d.seed = get<std::uint64_t>(in);
  d.m_fine = Level(get<std::uint16_t>(in));
  d.horizon.numerator = static_cast<std::int64_t>(get<std::uint64_t>(in));
  d.horizon.log2_denominator = get<std::uint16_t>(in);
  auto levels = get<std::uint16_t>(in);
  for (std::uint16_t i = 0; i < levels; ++i) {
    WalkDump::LevelSteps ls;
    ls.level = Level(get<std::uint16_t>(in));
    ls.raw = get_steps(in);
    ls.twisted = get_steps(in);
    d.levels.push_back(std::move(ls));
  }
  if (in.read(magic.data(), 4)) {
    if (std::memcmp(magic.data(), "DURS", 4) != 0) throw DomainError("unknown trailing section in dump");
    WalkDump::Durations dur;
    dur.ticks_per_fine_step = static_cast<std::int64_t>(get<std::uint64_t>(in));
    auto n = get<std::uint64_t>(in);
    if (n > (std::uint64_t{1} << 36)) throw DomainError("dump declares an implausible duration count");
    dur.values.resize(n);
    for (auto& v : dur.values) v = get<std::uint32_t>(in);
    d.durations = std::move(dur);
  }
  return d;
}

}  // namespace nestwalk
