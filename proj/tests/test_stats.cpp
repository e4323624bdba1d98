#include <doctest.h>

#include <cmath>

#include "nestwalk/errors.hpp"
#include "nestwalk/rng.hpp"
#include "nestwalk/stats.hpp"

using namespace nestwalk;

namespace {

std::vector<int> levels(int a, int b) {
  std::vector<int> v;
  for (int m = a; m <= b; ++m) v.push_back(m);
  return v;
}

// Binomial pmf by the multiplicative recurrence, independent of the library's lgamma route.
std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  pmf[0] = std::pow(1.0 - p, n);
  for (int k = 1; k <= n; ++k) pmf[static_cast<std::size_t>(k)] = pmf[static_cast<std::size_t>(k) - 1] * (n - k + 1) / k * p / (1.0 - p);
  return pmf;
}

}  // namespace

TEST_CASE("rate fit recovers exact synthetic slopes") {
  const auto lv = levels(3, 9);
  std::vector<double> e1;
  std::vector<double> e2;
  for (int m : lv) {
    e1.push_back(m * std::exp2(-m / 2.0));
    e2.push_back(std::sqrt(static_cast<double>(m)) * std::exp2(-m));
  }
  const RateFit a = fit_rate(lv, e1, Normalizer::m);
  CHECK(a.slope == doctest::Approx(-0.5));
  CHECK(a.intercept == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(a.max_residual < 1e-9);
  const RateFit b = fit_rate(lv, e2, Normalizer::sqrt_m);
  CHECK(b.slope == doctest::Approx(-1.0));
  CHECK(b.max_residual < 1e-9);
  const RateFit c = fit_rate(lv, e2, Normalizer::none);
  CHECK(c.slope > -1.0);
  CHECK(c.max_residual > 0.0);
}

TEST_CASE("rate fit with noise reports a standard error") {
  const auto lv = levels(4, 12);
  std::vector<double> e;
  CounterStream rng(7);
  for (int m : lv) e.push_back(std::exp2(-m + 0.2 * (rng.uniform() - 0.5)));
  const RateFit f = fit_rate(lv, e, Normalizer::none);
  CHECK(f.slope == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(f.slope_stderr > 0.0);
  CHECK(f.slope_stderr < 0.05);
}

TEST_CASE("rate fit rejects degenerate input") {
  const auto lv = levels(4, 6);
  CHECK_THROWS_AS(fit_rate(levels(4, 5), std::vector<double>{1.0, 0.5}, Normalizer::m), DomainError);
  CHECK_THROWS_AS(fit_rate(lv, std::vector<double>{1.0, 0.0, 0.5}, Normalizer::m), DomainError);
  CHECK_THROWS_AS(fit_rate(lv, std::vector<double>{1.0, -1.0, 0.5}, Normalizer::m), DomainError);
  CHECK_THROWS_AS(fit_rate(lv, std::vector<double>{1.0, 0.5}, Normalizer::m), DomainError);
}

TEST_CASE("independence test on constant gaps") {
  std::vector<int> s(100, 1);
  std::vector<double> g(100, 4.0);
  const auto r = independence_test(s, g);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("independence test on perfectly coupled gaps") {
  CounterStream rng(31);
  std::vector<int> s(100);
  std::vector<double> g(100);
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = rng.below(2) == 0 ? 1 : -1;
    g[k] = s[k] == 1 ? 4.0 : 8.0;
  }
  const auto r = independence_test(s, g, {10000, 5});
  CHECK(r.statistic == doctest::Approx(1.0));
  CHECK(r.p_value < 1e-3);
}

TEST_CASE("independence test sees gaps that depend on the running level") {
  CounterStream rng(32);
  std::vector<int> s(2000);
  std::vector<double> g(2000);
  long level = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    g[k] = level >= 0 ? 4.0 + static_cast<double>(rng.below(4)) : 8.0 + static_cast<double>(rng.below(4));
    s[k] = rng.below(2) == 0 ? 1 : -1;
    level += s[k];
  }
  CHECK(independence_test(s, g, {2000, 1}).p_value < 0.01);
}

TEST_CASE("independence test has calibrated size under the null") {
  const int trials = 300;
  const double alpha = 0.05;
  int rejections = 0;
  for (int t = 0; t < trials; ++t) {
    CounterStream rng(derive(40, Tag::independence, static_cast<std::uint64_t>(t)));
    std::vector<int> s(256);
    std::vector<double> g(256);
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = rng.below(2) == 0 ? 1 : -1;
      g[k] = 1.0 + static_cast<double>(rng.below(9));
    }
    if (independence_test(s, g, {400, rng()}).p_value <= alpha) ++rejections;
  }
  // exact 99.9% band for Binomial(300, 0.05) is [4, 29]
  CHECK(rejections >= 4);
  CHECK(rejections <= 29);
}

TEST_CASE("independence test is deterministic in its seed") {
  CounterStream rng(50);
  std::vector<int> s(128);
  std::vector<double> g(128);
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = rng.below(2) == 0 ? 1 : -1;
    g[k] = static_cast<double>(1 + rng.below(5));
  }
  const auto a = independence_test(s, g, {500, 9});
  const auto b = independence_test(s, g, {500, 9});
  CHECK(a.statistic == b.statistic);
  CHECK(a.p_value == b.p_value);
}

TEST_CASE("independence test input checks") {
  std::vector<int> s(63, 1);
  std::vector<double> g(63, 1.0);
  CHECK_THROWS_AS(independence_test(s, g), DomainError);
  std::vector<int> s2(64, 1);
  CHECK_THROWS_AS(independence_test(s2, g), DomainError);
  std::vector<double> g2(64, 1.0);
  g2[3] = 2.0;
  CHECK_THROWS_AS(independence_test(s2, g2, {0, 1}), UsageError);
}

TEST_CASE("median of odd and even sets") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(median({}), DomainError);
}

TEST_CASE("binomial interval matches a direct tail search") {
  CHECK(binomial_interval(200, 0.01, 0.99) == std::pair<std::int64_t, std::int64_t>{0, 6});
  CHECK(binomial_interval(300, 0.05, 0.999) == std::pair<std::int64_t, std::int64_t>{4, 29});
  for (int n : {20, 100, 200, 500}) {
    for (double p : {0.01, 0.05, 0.3}) {
      const auto pmf = binomial_pmf(n, p);
      std::int64_t lo = 0;
      double below = 0;
      while (below + pmf[static_cast<std::size_t>(lo)] <= 0.005) below += pmf[static_cast<std::size_t>(lo++)];
      std::int64_t hi = n;
      double above = 0;
      while (above + pmf[static_cast<std::size_t>(hi)] <= 0.005) above += pmf[static_cast<std::size_t>(hi--)];
      CHECK(binomial_interval(n, p, 0.99) == std::pair<std::int64_t, std::int64_t>{lo, hi});
    }
  }
  CHECK(binomial_interval(50, 0.0, 0.99) == std::pair<std::int64_t, std::int64_t>{0, 0});
  CHECK_THROWS_AS(binomial_interval(10, 1.5, 0.99), DomainError);
}
