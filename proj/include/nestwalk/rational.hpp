#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace nestwalk {

/// Exact rational number with 64-bit numerator and positive denominator,
/// always kept in lowest terms. Arithmetic goes through 128-bit
/// intermediates and throws std::overflow_error if the reduced result does
/// not fit back into 64 bits.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);  // NOLINT(google-explicit-constructor)

  /// Builds a reduced rational from a 128-bit fraction.
  static Rational from_wide(__int128 num, __int128 den);

  [[nodiscard]] std::int64_t num() const { return num_; }
  [[nodiscard]] std::int64_t den() const { return den_; }
  [[nodiscard]] double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }
  [[nodiscard]] bool is_integer() const { return den_ == 1; }
  /// Largest integer not above the value.
  [[nodiscard]] std::int64_t floor() const;
  [[nodiscard]] std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a) { return from_wide(-static_cast<__int128>(a.num_), a.den_); }

  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

Rational abs(const Rational& r);

/// Non-negative dyadic rational p / 2^q, the form used for horizons.
struct DyadicRational {
  std::int64_t numerator = 1;
  int log2_denominator = 0;

  [[nodiscard]] Rational value() const;
  [[nodiscard]] double to_double() const;
  /// Value expressed as an integer count of units 2^{-shift}; throws
  /// std::domain_error if it is not an integer in that unit.
  [[nodiscard]] std::int64_t in_units(int shift) const;
  [[nodiscard]] std::string str() const;

  /// Parses "p", "p/2^q" or "p/d" with d a power of two.
  static DyadicRational parse(const std::string& text);
};

}  // namespace nestwalk
