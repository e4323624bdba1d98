#include "nestwalk/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "nestwalk/errors.hpp"

namespace nestwalk {

namespace {

struct Named {
  BoundId id;
  std::string_view name;
};

constexpr Named kNames[] = {
    {BoundId::ldi, "ldi"},           {BoundId::hoeffding, "hoeffding"}, {BoundId::tlag, "tlag"},
    {BoundId::refin, "refin"},       {BoundId::wiener, "wiener"},       {BoundId::wienerm, "wienerm"},
    {BoundId::equid, "equid"},       {BoundId::qvar_a, "qvar_a"},       {BoundId::qvar_b, "qvar_b"},
    {BoundId::approx_a, "approx_a"}, {BoundId::approx_b, "approx_b"},   {BoundId::approxNm_a, "approxNm_a"},
    {BoundId::approxNm_b, "approxNm_b"},
};

bool needs_three_halves(BoundId id) {
  return id != BoundId::ldi && id != BoundId::tlag && id != BoundId::refin && id != BoundId::hoeffding;
}

bool uses_truncation(BoundId id) {
  switch (id) {
    case BoundId::qvar_a:
    case BoundId::qvar_b:
    case BoundId::approx_a:
    case BoundId::approx_b:
    case BoundId::approxNm_a:
    case BoundId::approxNm_b:
      return true;
    default:
      return false;
  }
}

/// c * (base 4^m)^{1-C}, computed in logs so that large m does not underflow early.
double power_tail(double c, double base, int m, double C) {
  return c * std::exp((1.0 - C) * (std::log(base) + 2.0 * m * std::log(2.0)));
}

/// m^{1/2} 2^{-m}
double sqrt_rate(int m) { return std::sqrt(static_cast<double>(m)) * std::ldexp(1.0, -m); }

/// m 2^{-m/2}
double half_rate(int m) { return static_cast<double>(m) * std::pow(2.0, -m / 2.0); }

}  // namespace

std::string_view to_string(BoundId id) {
  for (const auto& n : kNames) {
    if (n.id == id) return n.name;
  }
  return "?";
}

BoundId parse_bound(std::string_view name) {
  for (const auto& n : kNames) {
    if (n.name == name) return n.id;
  }
  throw UsageError("unknown theorem id '" + std::string(name) + "'");
}

const std::vector<BoundId>& all_bounds() {
  static const std::vector<BoundId> ids = [] {
    std::vector<BoundId> v;
    for (const auto& n : kNames) v.push_back(n.id);
    return v;
  }();
  return ids;
}

double log_star(double x) {
  if (!(x > 0.0)) throw DomainError("log_star needs a positive argument");
  return std::max(1.0, std::log(x));
}

double hoeffding_tail(double x) {
  if (!(x >= 0.0)) throw DomainError("hoeffding_tail needs x >= 0");
  return 2.0 * std::exp(-x * x / 2.0);
}

BoundResult eval_bound(const BoundQuery& q) {
  const std::string name(to_string(q.id));
  if (q.id == BoundId::hoeffding) {
    if (!(q.x >= 0.0)) throw UsageError("hoeffding: x must be non-negative");
    BoundResult r{q.x, hoeffding_tail(q.x), false};
    if (r.probability > 1.0) {
      r.probability = 1.0;
      r.clamped = true;
    }
    return r;
  }
  if (!(q.K > 0.0)) throw UsageError(name + ": K must be positive");
  if (q.m < 1) throw UsageError(name + ": m must be at least 1");
  if (!(q.C > 1.0)) throw UsageError(name + ": C must exceed 1");
  if (needs_three_halves(q.id) && q.C < 1.5) throw UsageError(name + ": C must be at least 3/2");

  const double k_star = std::max(1.0, q.K);
  const double lk = log_star(q.K);
  const double a = q.a_m.value_or(std::max(q.K, 1.0));
  if (uses_truncation(q.id) && a < std::max(q.K, 1.0)) throw UsageError(name + ": a_m must be at least max(K, 1)");
  const double la = log_star(a);
  const int m = q.m;
  const double tail = q.D * std::pow(static_cast<double>(m), -1.0 - q.epsilon);

  BoundResult r;
  switch (q.id) {
    case BoundId::ldi: {
      const double n = q.K * std::ldexp(1.0, 2 * m);
      r.envelope = std::sqrt(2.0 * q.C * n * std::log(n));
      r.probability = 2.0 * std::pow(n, 1.0 - q.C);
      break;
    }
    case BoundId::tlag:
      r.envelope = std::sqrt(1.5 * q.C * q.K * lk) * sqrt_rate(m);
      r.probability = power_tail(2.0, q.K, m, q.C);
      break;
    case BoundId::refin:
    case BoundId::wiener:
    case BoundId::wienerm:
      r.envelope = std::pow(k_star, 0.25) * std::pow(lk, 0.75) * half_rate(m);
      r.probability = power_tail(q.id == BoundId::refin ? 3.0 : q.id == BoundId::wiener ? 6.0 : 10.0, q.K, m, q.C);
      break;
    case BoundId::equid:
      r.envelope = 6.0 * std::sqrt(q.C * k_star * lk) * sqrt_rate(m);
      r.probability = power_tail(4.0, q.K, m, q.C);
      break;
    case BoundId::qvar_a:
    case BoundId::qvar_b:
      r.envelope = 12.0 * std::sqrt(q.C * a * la) * sqrt_rate(m);
      r.probability = power_tail(3.0, a, m, q.C) + (q.id == BoundId::qvar_b ? tail : 0.0);
      break;
    case BoundId::approx_a:
    case BoundId::approx_b:
      r.envelope = std::pow(a, 0.25) * std::pow(la, 0.75) * half_rate(m);
      r.probability = power_tail(10.0, a, m, q.C) + (q.id == BoundId::approx_b ? tail : 0.0);
      break;
    case BoundId::approxNm_a:
    case BoundId::approxNm_b:
      r.envelope = 2.0 * std::pow(a, 0.25) * std::pow(la, 0.75) * half_rate(m);
      r.probability = power_tail(14.0, a, m, q.C) + (q.id == BoundId::approxNm_b ? tail : 0.0);
      break;
    case BoundId::hoeffding:
      break;
  }
  if (r.probability > 1.0) {
    r.probability = 1.0;
    r.clamped = true;
  }
  return r;
}

}  // namespace nestwalk
