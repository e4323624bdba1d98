#pragma once

// Little-endian binary dump of walk families and martingale paths.
//
//   "MWNF" | u16 version | u64 seed | u16 m_fine | u64 K numerator | u16 K log2 denominator
//   u16 level count, then per level:
//     u16 level | u64 n_raw | ceil(n_raw/8) bytes | u64 n_twisted | ceil(n_twisted/8) bytes
//   optional durations section:
//     "DURS" | u64 ticks per fine step | u64 n | n x u32 durations
//
// Step bits are packed LSB first, 1 = +1.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nestwalk/dyadic.hpp"
#include "nestwalk/generators.hpp"
#include "nestwalk/twist_shrink.hpp"

namespace nestwalk {

constexpr std::uint16_t kDumpVersion = 1;

struct WalkDump {
  struct LevelSteps {
    Level level;
    std::vector<std::int8_t> raw;
    std::vector<std::int8_t> twisted;
  };
  struct Durations {
    std::int64_t ticks_per_fine_step = 0;
    std::vector<std::int64_t> values;
  };

  std::uint64_t seed = 0;
  Level m_fine;
  DyadicRational horizon;
  std::vector<LevelSteps> levels;
  std::optional<Durations> durations;
};

void write_family(std::ostream& out, const NestedWalkFamily& family);
/// One level (the fine walk, raw == twisted) followed by the durations section.
void write_martingale(std::ostream& out, const MartingaleInstance& instance, std::uint64_t seed,
                      const DyadicRational& horizon);
/// Throws DomainError on a malformed or truncated stream.
WalkDump read_dump(std::istream& in);

}  // namespace nestwalk
