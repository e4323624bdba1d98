#include "nestwalk/rational.hpp"

#include <bit>
#include <limits>
#include <stdexcept>

namespace nestwalk {

namespace {

__int128 wide_abs(__int128 x) { return x < 0 ? -x : x; }

__int128 wide_gcd(__int128 a, __int128 b) {
  a = wide_abs(a);
  b = wide_abs(b);
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

bool fits64(__int128 x) {
  return x >= std::numeric_limits<std::int64_t>::min() && x <= std::numeric_limits<std::int64_t>::max();
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  *this = from_wide(num, den);
}

Rational Rational::from_wide(__int128 num, __int128 den) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 g = wide_gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) den = 1;
  if (!fits64(num) || !fits64(den)) throw std::overflow_error("rational overflow");
  Rational r;
  r.num_ = static_cast<std::int64_t>(num);
  r.den_ = static_cast<std::int64_t>(den);
  return r;
}

std::int64_t Rational::floor() const {
  std::int64_t q = num_ / den_;
  if (num_ % den_ != 0 && num_ < 0) --q;
  return q;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                             static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                             static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw std::domain_error("rational division by zero");
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num_) * b.den_ <=> static_cast<__int128>(b.num_) * a.den_;
}

Rational abs(const Rational& r) { return r.num() < 0 ? -r : r; }

Rational DyadicRational::value() const {
  if (log2_denominator < 0 || log2_denominator > 62) throw std::domain_error("dyadic exponent out of range");
  return Rational(numerator, std::int64_t{1} << log2_denominator);
}

double DyadicRational::to_double() const { return value().to_double(); }

std::int64_t DyadicRational::in_units(int shift) const {
  int d = shift - log2_denominator;
  if (d >= 0) {
    if (d > 62 || (numerator != 0 && std::bit_width(static_cast<std::uint64_t>(numerator < 0 ? -numerator : numerator)) + d > 62)) {
      throw std::overflow_error("dyadic value overflows in requested unit");
    }
    return numerator * (std::int64_t{1} << d);
  }
  std::int64_t div = std::int64_t{1} << (-d);
  if (numerator % div != 0) throw std::domain_error("dyadic value " + str() + " is not a whole number of units");
  return numerator / div;
}

std::string DyadicRational::str() const {
  if (log2_denominator == 0) return std::to_string(numerator);
  return std::to_string(numerator) + "/2^" + std::to_string(log2_denominator);
}

DyadicRational DyadicRational::parse(const std::string& text) {
  auto bad = [&]() { return std::invalid_argument("not a dyadic rational: '" + text + "'"); };
  auto to_int = [&](const std::string& s) -> std::int64_t {
    if (s.empty()) throw bad();
    std::size_t pos = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      throw bad();
    }
    if (pos != s.size()) throw bad();
    return v;
  };
  auto slash = text.find('/');
  if (slash == std::string::npos) return {to_int(text), 0};
  DyadicRational out{to_int(text.substr(0, slash)), 0};
  std::string den = text.substr(slash + 1);
  if (den.rfind("2^", 0) == 0) {
    std::int64_t q = to_int(den.substr(2));
    if (q < 0 || q > 62) throw bad();
    out.log2_denominator = static_cast<int>(q);
  } else {
    std::int64_t d = to_int(den);
    if (d <= 0 || !std::has_single_bit(static_cast<std::uint64_t>(d))) throw bad();
    out.log2_denominator = std::countr_zero(static_cast<std::uint64_t>(d));
  }
  // normalize p/2^q to lowest terms
  while (out.log2_denominator > 0 && out.numerator % 2 == 0) {
    out.numerator /= 2;
    --out.log2_denominator;
  }
  return out;
}

}  // namespace nestwalk
