#pragma once

// Closed-form deviation envelopes and probability bounds for the nested
// walk approximations. Every query returns (envelope, probability); the
// probability is clamped to [0, 1] and the clamp is reported, since the
// formulas are vacuous for small m.
//
//   id          envelope                                   probability
//   ldi         (2 C N log N)^{1/2},  N = K 4^m            2 N^{1-C}
//   hoeffding   x  (in standard deviations)                2 exp(-x^2/2)
//   tlag        (3/2 C K log*K)^{1/2} m^{1/2} 2^{-m}       2 (K 4^m)^{1-C}
//   refin       K*^{1/4} (log*K)^{3/4} m 2^{-m/2}          3 (K 4^m)^{1-C}
//   wiener      same as refin                              6 (K 4^m)^{1-C}
//   wienerm     same as refin                              10 (K 4^m)^{1-C}
//   equid       6 (C K* log*K)^{1/2} m^{1/2} 2^{-m}        4 (K 4^m)^{1-C}
//   qvar_a      12 (C a log*a)^{1/2} m^{1/2} 2^{-m}        3 (a 4^m)^{1-C}
//   qvar_b      as qvar_a                                  qvar_a + D m^{-1-eps}
//   approx_a    a^{1/4} (log*a)^{3/4} m 2^{-m/2}           10 (a 4^m)^{1-C}
//   approx_b    as approx_a                                approx_a + D m^{-1-eps}
//   approxNm_a  2 a^{1/4} (log*a)^{3/4} m 2^{-m/2}         14 (a 4^m)^{1-C}
//   approxNm_b  as approxNm_a                              approxNm_a + D m^{-1-eps}
//
// with K* = max(1, K), log* x = max(1, log x) and a = a_m >= max(K, 1).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nestwalk {

enum class BoundId {
  ldi,
  hoeffding,
  tlag,
  refin,
  wiener,
  wienerm,
  equid,
  qvar_a,
  qvar_b,
  approx_a,
  approx_b,
  approxNm_a,
  approxNm_b,
};

std::string_view to_string(BoundId id);
/// Throws UsageError for an unknown name.
BoundId parse_bound(std::string_view name);
const std::vector<BoundId>& all_bounds();

struct BoundQuery {
  BoundId id = BoundId::wiener;
  double K = 1.0;
  int m = 1;
  double C = 3.0;
  /// Truncation level a_m; defaults to max(K, 1) when unset.
  std::optional<double> a_m;
  double epsilon = 0.0;
  /// D(K) of the tail condition; only the *_b bounds use it.
  double D = 0.0;
  /// Hoeffding threshold in standard deviations.
  double x = 0.0;
};

struct BoundResult {
  double envelope = 0.0;
  double probability = 0.0;
  bool clamped = false;
};

double log_star(double x);
/// 2 exp(-x^2 / 2), unclamped.
double hoeffding_tail(double x);

/// Throws UsageError when C, K, m or a_m violate the bound's hypotheses
/// (C > 1 for ldi/tlag/refin, C >= 3/2 for the rest).
BoundResult eval_bound(const BoundQuery& q);

}  // namespace nestwalk
