#include "nestwalk/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nestwalk/errors.hpp"
#include "nestwalk/rng.hpp"

namespace nestwalk {

std::string_view to_string(Normalizer n) {
  switch (n) {
    case Normalizer::m:
      return "m";
    case Normalizer::sqrt_m:
      return "sqrt_m";
    case Normalizer::none:
      return "none";
  }
  return "?";
}

RateFit fit_rate(std::span<const int> levels, std::span<const double> errors, Normalizer normalizer) {
  if (levels.size() != errors.size()) throw DomainError("fit_rate: one error per level required");
  if (levels.size() < 3) throw DomainError("fit_rate: at least three levels required");
  const auto n = static_cast<Eigen::Index>(levels.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = errors[static_cast<std::size_t>(i)];
    const int m = levels[static_cast<std::size_t>(i)];
    if (!(e > 0.0) || !std::isfinite(e)) throw DomainError("fit_rate: degenerate fit, nonpositive error at level " + std::to_string(m));
    double norm = 1.0;
    if (normalizer == Normalizer::m) norm = m;
    if (normalizer == Normalizer::sqrt_m) norm = std::sqrt(static_cast<double>(m));
    design(i, 0) = m;
    design(i, 1) = 1.0;
    y(i) = std::log2(e / norm);
  }
  Eigen::Vector2d beta = design.colPivHouseholderQr().solve(y);
  Eigen::VectorXd resid = y - design * beta;

  RateFit fit;
  fit.slope = beta(0);
  fit.intercept = beta(1);
  fit.max_residual = resid.cwiseAbs().maxCoeff();
  if (n > 2) {
    const double sigma2 = resid.squaredNorm() / static_cast<double>(n - 2);
    const double mean_m = design.col(0).mean();
    const double sxx = (design.col(0).array() - mean_m).square().sum();
    fit.slope_stderr = std::sqrt(sigma2 / sxx);
  }
  return fit;
}

namespace {

struct Centered {
  std::vector<double> x;
  double sxx = 0.0;
};

Centered center(std::vector<double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  Centered c;
  for (double& v : x) {
    v -= mean;
    c.sxx += v * v;
  }
  c.x = std::move(x);
  return c;
}

class Statistic {
 public:
  Statistic(std::span<const int> signs, std::span<const double> gaps) : n_(signs.size()) {
    std::vector<double> lag1(n_ - 1);
    std::vector<double> lag0(n_);
    std::vector<double> level(n_ - 1);
    long running = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      running += signs[k];
      lag0[k] = signs[k];
      if (k + 1 < n_) {
        lag1[k] = signs[k];
        level[k] = running >= 0 ? 1.0 : 0.0;
      }
    }
    lag1_ = center(std::move(lag1));
    lag0_ = center(std::move(lag0));
    level_ = center(std::move(level));
    for (double g : gaps) {
      sum_ += g;
      sum2_ += g * g;
    }
  }

  /// max of the three |corr| values for gap order `g`.
  [[nodiscard]] double operator()(std::span<const double> g) const {
    double d1 = 0.0;
    double d0 = 0.0;
    double dl = 0.0;
    for (std::size_t k = 0; k + 1 < n_; ++k) {
      d1 += lag1_.x[k] * g[k + 1];
      d0 += lag0_.x[k] * g[k];
      dl += level_.x[k] * g[k + 1];
    }
    d0 += lag0_.x[n_ - 1] * g[n_ - 1];

    const auto nd = static_cast<double>(n_);
    const double syy_all = sum2_ - sum_ * sum_ / nd;
    const double g0 = g[0];
    const double s_tail = sum_ - g0;
    const double syy_tail = (sum2_ - g0 * g0) - s_tail * s_tail / (nd - 1.0);
    return std::max({corr(d1, lag1_.sxx, syy_tail), corr(d0, lag0_.sxx, syy_all), corr(dl, level_.sxx, syy_tail)});
  }

 private:
  static double corr(double sxy, double sxx, double syy) {
    if (sxx <= 0.0 || syy <= 1e-12) return 0.0;
    return std::abs(sxy) / std::sqrt(sxx * syy);
  }

  std::size_t n_;
  Centered lag1_;
  Centered lag0_;
  Centered level_;
  double sum_ = 0.0;
  double sum2_ = 0.0;
};

/// Bounded 32-bit draws for Fisher-Yates, two per 64-bit stream output.
class Shuffler {
 public:
  explicit Shuffler(std::uint64_t key) : stream_(key) {}

  std::uint32_t below(std::uint32_t bound) {
    std::uint64_t m = static_cast<std::uint64_t>(next()) * bound;
    auto low = static_cast<std::uint32_t>(m);
    if (low < bound) {
      const std::uint32_t threshold = (0U - bound) % bound;
      while (low < threshold) {
        m = static_cast<std::uint64_t>(next()) * bound;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size() - 1; i > 0; --i) std::swap(v[i], v[below(static_cast<std::uint32_t>(i + 1))]);
  }

 private:
  std::uint32_t next() {
    if (have_) {
      have_ = false;
      return static_cast<std::uint32_t>(buffer_ >> 32);
    }
    buffer_ = stream_();
    have_ = true;
    return static_cast<std::uint32_t>(buffer_);
  }

  CounterStream stream_;
  std::uint64_t buffer_ = 0;
  bool have_ = false;
};

std::int64_t count_at_least(const Statistic& stat, std::vector<double> g, double observed, const IndependenceOptions& options) {
  Shuffler rng(derive(options.seed, Tag::permutation, 0));
  std::int64_t at_least = 0;
  for (std::int64_t s = 0; s < options.shuffles; ++s) {
    rng.shuffle(g);
    if (stat(std::span<const double>(g)) >= observed) ++at_least;
  }
  return at_least;
}

}  // namespace

IndependenceResult independence_test(std::span<const int> signs, std::span<const double> gaps,
                                     const IndependenceOptions& options) {
  if (signs.size() != gaps.size()) throw DomainError("independence_test: signs and gaps differ in length");
  if (signs.size() < 64) throw DomainError("independence_test: at least 64 observations required");
  if (options.shuffles < 1) throw UsageError("independence_test: at least one shuffle required");
  if (std::all_of(gaps.begin(), gaps.end(), [&](double g) { return g == gaps.front(); })) return {0.0, 1.0};

  const Statistic stat(signs, gaps);
  const double observed = stat(gaps);
  if (gaps.size() > std::numeric_limits<std::uint32_t>::max()) throw DomainError("independence_test: sequence too long");
  const std::int64_t at_least = count_at_least(stat, std::vector<double>(gaps.begin(), gaps.end()), observed, options);
  return {observed, static_cast<double>(at_least) / static_cast<double>(options.shuffles)};
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t n, double p, double level) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0) || !(level > 0.0 && level < 1.0)) {
    throw DomainError("binomial_interval: invalid parameters");
  }
  const double tail = (1.0 - level) / 2.0;
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (std::int64_t k = 0; k <= n; ++k) {
    const double lp = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                      std::lgamma(static_cast<double>(n - k) + 1.0);
    double v = lp;
    if (k > 0) v += static_cast<double>(k) * std::log(p);
    if (n - k > 0) v += static_cast<double>(n - k) * std::log1p(-p);
    pmf[static_cast<std::size_t>(k)] = (p == 0.0 && k > 0) || (p == 1.0 && k < n) ? 0.0 : std::exp(v);
  }
  std::int64_t lo = 0;
  double below = 0.0;
  while (lo < n && below + pmf[static_cast<std::size_t>(lo)] <= tail) below += pmf[static_cast<std::size_t>(lo++)];
  std::int64_t hi = n;
  double above = 0.0;
  while (hi > 0 && above + pmf[static_cast<std::size_t>(hi)] <= tail) above += pmf[static_cast<std::size_t>(hi--)];
  return {lo, hi};
}

}  // namespace nestwalk
