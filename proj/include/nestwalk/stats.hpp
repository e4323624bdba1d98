#pragma once

// Rate fitting, the sign/gap permutation test and small order-statistic helpers.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace nestwalk {

enum class Normalizer { m, sqrt_m, none };

std::string_view to_string(Normalizer n);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Largest |observed - fitted| over the levels, in log2 units.
  double max_residual = 0.0;
  /// Standard error of the slope; 0 when the fit is exact or has no spare degree of freedom.
  double slope_stderr = 0.0;
};

/// Least squares of log2(e_m / normalizer(m)) against m. Needs at least three
/// levels; throws DomainError on a nonpositive error value.
RateFit fit_rate(std::span<const int> levels, std::span<const double> errors, Normalizer normalizer);

struct IndependenceResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

struct IndependenceOptions {
  std::int64_t shuffles = 10000;
  std::uint64_t seed = 0;
};

/// Permutation test of independence between the signs of the embedded steps
/// and the inter-crossing durations. gaps[k] is the duration of crossing k+1,
/// signs[k] its direction. The statistic is the largest of
///   |corr(sign_k, gap_{k+1})|, |corr(sign_k, gap_k)|, |corr(1{level_k >= 0}, gap_{k+1})|
/// where level_k is the running sum of signs. The p-value is the fraction of
/// shuffled gap sequences whose statistic is at least the observed one.
/// Constant gaps give (0, 1). Throws DomainError on lengths below 64 or mismatch.
IndependenceResult independence_test(std::span<const int> signs, std::span<const double> gaps,
                                     const IndependenceOptions& options = {});

double median(std::vector<double> values);

/// Smallest and largest counts [lo, hi] with P(X < lo) <= (1-level)/2 and
/// P(X > hi) <= (1-level)/2 for X ~ Binomial(n, p).
std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t n, double p, double level);

}  // namespace nestwalk
