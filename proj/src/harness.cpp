#include "nestwalk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nestwalk/embedding.hpp"
#include "nestwalk/errors.hpp"
#include "nestwalk/rng.hpp"
#include "nestwalk/twist_shrink.hpp"

namespace nestwalk {

namespace {

constexpr int kFitMinLevel = 4;

std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) return "nan";
  return {buf, end};
}

std::int64_t pow2(int e) { return std::int64_t{1} << e; }

std::string recipe(std::uint64_t seed, int level, std::int64_t index) {
  return "seed=" + std::to_string(seed) + " level=" + std::to_string(level) + " index=" + std::to_string(index);
}

[[noreturn]] void violation(const std::string& what, std::uint64_t seed, int level, std::int64_t index) {
  throw IdentityViolation(what + " failed at " + recipe(seed, level, index));
}

/// floor(K 4^m).
std::int64_t grid_horizon(const DyadicRational& K, int m) {
  return Rational::from_wide(static_cast<__int128>(K.numerator) << (2 * m), static_cast<__int128>(1) << K.log2_denominator)
      .floor();
}

/// min(K, end 2^{-shift}); sets `short_of_horizon` when the end comes first.
DyadicRational clip(const DyadicRational& K, std::int64_t end, int shift, bool& short_of_horizon) {
  if (Rational(end, pow2(shift)) < K.value()) {
    short_of_horizon = true;
    return {end, shift};
  }
  return K;
}

DyadicRational clip(const DyadicRational& K, const DyadicPath& a, const DyadicPath& b, bool& short_of_horizon) {
  DyadicRational h = clip(K, a.steps(), a.level.time_shift(), short_of_horizon);
  return clip(h, b.steps(), b.level.time_shift(), short_of_horizon);
}


std::size_t kind_index(GeneratorKind k) { return static_cast<std::size_t>(k); }

/// Slowly increasing c_m of the rate statements, pinned to log2(m + 2).
double c_m(int m) { return std::log2(static_cast<double>(m) + 2.0); }

double rate_shape(Normalizer n, int m) {
  const double md = m;
  return n == Normalizer::sqrt_m ? std::sqrt(md) * std::exp2(-md) : md * std::exp2(-md / 2.0);
}

double truncation_level(const GeneratorSpec& spec, double K) {
  return std::max({std::numbers::e, K, spec.qv_rate_bound() * K});
}

// ---------------------------------------------------------------------------
// Exact identities

void check_family(const NestedWalkFamily& f, std::uint64_t seed, ExactSummary& out) {
  const int mf = f.m_fine().m;
  for (int m = 0; m < mf; ++m) {
    const auto& parent = f.shrunken[static_cast<std::size_t>(m)].values;
    const auto& child = f.shrunken[static_cast<std::size_t>(m) + 1].values;
    const auto& T = f.crossing_times[static_cast<std::size_t>(m) + 1].times;
    const auto usable = std::min<std::size_t>(parent.size(), T.size());
    for (std::size_t k = 0; k < usable; ++k) {
      auto t = static_cast<std::size_t>(T[k]);
      if (t >= child.size()) break;
      if (child[t] != 2 * parent[k]) violation("refinement identity", seed, m + 1, static_cast<std::int64_t>(k));
      ++out.refinement_checks;
    }
  }
  const DyadicPath& w = f.shrunken[static_cast<std::size_t>(mf)];
  std::vector<std::int64_t> finer;
  for (int m = mf - 1; m >= 0; --m) {
    StoppingSequence s = skorohod_times(w, Level(m));
    StoppingSequence composed = composed_times(f, Level(m), Level(mf));
    const std::size_t common = std::min(s.times.size(), composed.times.size());
    for (std::size_t k = 0; k < common; ++k) {
      if (s.times[k] != composed.times[k]) violation("embedding equals composed crossing times", seed, m, static_cast<std::int64_t>(k));
      ++out.embedding_checks;
    }
    if (!finer.empty() && !std::includes(finer.begin(), finer.end(), s.times.begin(), s.times.end())) {
      violation("crossing-time nesting", seed, m, 0);
    }
    out.nesting_checks += s.count();
    finer = std::move(s.times);
  }
}

void check_martingale(const MartingaleInstance& inst, const std::vector<int>& levels, const DyadicRational& K,
                      int duality_samples, std::uint64_t seed, ExactSummary& out) {
  const TimeChange& c = inst.time_change();
  const std::int64_t u = c.clock().ticks_per_fine_step();
  const DyadicPath& w = inst.fine_walk();
  std::vector<int> check_levels = levels;
  for (int m : levels) {
    if (m + 1 <= w.level.m) check_levels.push_back(m + 1);
  }
  std::sort(check_levels.begin(), check_levels.end());
  check_levels.erase(std::unique(check_levels.begin(), check_levels.end()), check_levels.end());

  std::vector<std::int64_t> finer;
  int finer_level = -1;
  for (auto it = check_levels.rbegin(); it != check_levels.rend(); ++it) {
    const int m = *it;
    StoppingSequence tau = martingale_crossing_times(inst.path, Level(m));
    StoppingSequence s = skorohod_times(w, Level(m));
    if (tau.times.size() != s.times.size()) violation("crossing counts of M and W agree", seed, m, tau.count());
    const DiscreteQV n_m(tau, c.clock());
    for (std::size_t k = 0; k < tau.times.size(); ++k) {
      if (c.intrinsic_at(Rational(tau.times[k])) != Rational(s.times[k] * u)) {
        violation("s_m(k) = <M> at tau_m(k)", seed, m, static_cast<std::int64_t>(k));
      }
      if (n_m.at(Rational(tau.times[k])) != Rational(static_cast<std::int64_t>(k), pow2(2 * m))) {
        violation("N_m(tau_m(k)) = k 4^{-m}", seed, m, static_cast<std::int64_t>(k));
      }
    }
    out.embedding_checks += tau.count();
    out.counting_checks += tau.count();
    if (finer_level == m + 1 && !std::includes(finer.begin(), finer.end(), tau.times.begin(), tau.times.end())) {
      violation("tau nesting", seed, m, 0);
    }
    if (finer_level == m + 1) out.nesting_checks += tau.count();
    finer = std::move(tau.times);
    finer_level = m;
  }

  // <M>_{T_s} = s, and T_s <= t exactly when s <= <M>_t, at random dyadic s and t.
  const std::int64_t horizon_ticks =
      std::min(K.in_units(c.clock().tick_shift()), c.total_real_ticks());
  const Rational top = c.intrinsic_at(Rational(horizon_ticks));
  CounterStream rng(derive(seed, Tag::duality, 0));
  constexpr std::int64_t kGrid = std::int64_t{1} << 20;
  for (int i = 0; i < duality_samples; ++i) {
    const Rational s = top * Rational(static_cast<std::int64_t>(rng.below(kGrid + 1)), kGrid);
    const auto t_s = quasi_inverse(c, s);
    if (!t_s || c.intrinsic_at(*t_s) != s) violation("time-change duality", seed, -1, i);
    const Rational t = Rational(horizon_ticks) * Rational(static_cast<std::int64_t>(rng.below(kGrid + 1)), kGrid);
    if ((*t_s <= t) != (s <= c.intrinsic_at(t))) violation("time-change Galois relation", seed, -1, i);
    ++out.duality_checks;
  }
}

void add(ExactSummary& a, const ExactSummary& b) {
  a.refinement_checks += b.refinement_checks;
  a.embedding_checks += b.embedding_checks;
  a.counting_checks += b.counting_checks;
  a.nesting_checks += b.nesting_checks;
  a.duality_checks += b.duality_checks;
}

// ---------------------------------------------------------------------------
// Series layout and per-replication measurements

struct SeriesDef {
  std::string id;
  std::string quantity;
  BoundId bound;
  Normalizer normalizer;
  std::optional<GeneratorKind> generator;
};

std::vector<SeriesDef> series_for(const ExperimentConfig& cfg, Suite suite) {
  std::vector<SeriesDef> defs;
  const bool all = suite == Suite::all;
  if (all || suite == Suite::construct) {
    defs.push_back({"E1_tlag", "sup_k |T_{m+1}(k) 4^{-(m+1)} - k 4^{-m}|", BoundId::tlag, Normalizer::sqrt_m, {}});
    defs.push_back({"E1_refin", "sup |B~_{m+1} - B~_m|", BoundId::refin, Normalizer::m, {}});
    defs.push_back({"E2", "sup |B~_mf - B~_m|", BoundId::wiener, Normalizer::m, {}});
    defs.push_back({"E3", "sup_k |s_m(k) - k 4^{-m}|", BoundId::equid, Normalizer::sqrt_m, {}});
    defs.push_back({"E4", "sup |B~_mf - B_m|", BoundId::wienerm, Normalizer::m, {}});
  }
  for (GeneratorKind g : cfg.generators) {
    const std::string tag(to_string(g));
    if (all || suite == Suite::qvar) {
      defs.push_back({"E5:" + tag, "sup |<M> - N_m|", BoundId::qvar_a, Normalizer::sqrt_m, g});
    }
    if (all || suite == Suite::approx) {
      defs.push_back({"E6a:" + tag, "sup |M - B_m(<M>)|", BoundId::approx_a, Normalizer::m, g});
      defs.push_back({"E6b:" + tag, "sup |M - B_m(N_m)|", BoundId::approxNm_a, Normalizer::m, g});
    }
  }
  return defs;
}

struct RepResult {
  /// errors[series][level]
  std::vector<std::vector<double>> errors;
  std::vector<bool> truncated;
  std::vector<double> vertex_agreement;
  ExactSummary exact;
};

std::size_t index_of(const std::vector<SeriesDef>& defs, const std::string& id) {
  for (std::size_t i = 0; i < defs.size(); ++i) {
    if (defs[i].id == id) return i;
  }
  return defs.size();
}

void run_construct(const ExperimentConfig& cfg, const std::vector<int>& levels, const std::vector<SeriesDef>& defs,
                   std::uint64_t rep_seed, RepResult& out) {
  const std::uint64_t seed = derive(rep_seed, Tag::family, 0);
  const NestedWalkFamily f = build_nested(seed, Level(cfg.m_fine), cfg.horizon);
  check_family(f, seed, out.exact);

  const DyadicRational& K = cfg.horizon;
  const int mf = cfg.m_fine;
  const DyadicPath& w = f.shrunken[static_cast<std::size_t>(mf)];
  const std::size_t i_tlag = index_of(defs, "E1_tlag");
  const std::size_t i_refin = index_of(defs, "E1_refin");
  const std::size_t i_e2 = index_of(defs, "E2");
  const std::size_t i_e3 = index_of(defs, "E3");
  const std::size_t i_e4 = index_of(defs, "E4");

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const int m = levels[li];
    const std::int64_t kmax = grid_horizon(K, m);
    const DyadicPath& bm = f.shrunken[static_cast<std::size_t>(m)];
    const DyadicPath& bm1 = f.shrunken[static_cast<std::size_t>(m) + 1];

    // E1 time lag, in level-(m+1) steps.
    const auto& T = f.crossing_times[static_cast<std::size_t>(m) + 1];
    std::int64_t lag = 0;
    const std::int64_t klag = std::min(kmax, T.count());
    if (klag < kmax) out.truncated[i_tlag] = true;
    for (std::int64_t k = 0; k <= klag; ++k) lag = std::max(lag, std::abs(T.times[static_cast<std::size_t>(k)] - 4 * k));
    out.errors[i_tlag][li] = Rational(lag, pow2(2 * (m + 1))).to_double();

    bool short_refin = false;
    out.errors[i_refin][li] = sup_distance(bm1, bm, clip(K, bm1, bm, short_refin)).to_double();
    if (short_refin) out.truncated[i_refin] = true;

    bool short_e2 = false;
    out.errors[i_e2][li] = sup_distance(w, bm, clip(K, w, bm, short_e2)).to_double();
    if (short_e2) out.truncated[i_e2] = true;

    // E3: Skorohod times of the proxy, in fine steps.
    const StoppingSequence s = skorohod_times(w, Level(m));
    const std::int64_t ks = std::min(kmax, s.count());
    if (ks < kmax) out.truncated[i_e3] = true;
    std::int64_t dev = 0;
    const std::int64_t unit = pow2(2 * (mf - m));
    for (std::int64_t k = 0; k <= ks; ++k) dev = std::max(dev, std::abs(s.times[static_cast<std::size_t>(k)] - k * unit));
    out.errors[i_e3][li] = Rational(dev, pow2(2 * mf)).to_double();

    // E4: embedded walk against the twisted walk and the proxy.
    const EmbeddedWalk b = embedded_walk(w, s, Level(m));
    const std::int64_t kv = std::min({kmax, b.values.steps(), bm.steps()});
    std::int64_t agree = 0;
    for (std::int64_t k = 0; k <= kv; ++k) {
      if (b.values.values[static_cast<std::size_t>(k)] == bm.values[static_cast<std::size_t>(k)]) ++agree;
    }
    out.vertex_agreement[li] = static_cast<double>(agree) / static_cast<double>(kv + 1);
    bool short_e4 = false;
    out.errors[i_e4][li] = sup_distance(w, b.values, clip(K, w, b.values, short_e4)).to_double();
    if (short_e4 || kv < kmax) out.truncated[i_e4] = true;
  }
}

/// B_m(<M>_t) as a piecewise-linear function of real time (values in units 2^{-(2 mf - m)}).
PiecewiseLinear embedded_on_clock(const DyadicPath& b, const TimeChange& c, int mf) {
  const int m = b.level.m;
  const std::int64_t L = pow2(2 * (mf - m));
  const std::int64_t imax = std::min(c.fine_steps(), b.steps() * L);
  auto cum = c.cumulative();
  std::vector<std::int64_t> times(cum.begin(), cum.begin() + imax + 1);
  std::vector<std::int64_t> values(static_cast<std::size_t>(imax) + 1);
  for (std::int64_t i = 0; i <= imax; ++i) {
    const std::int64_t k = i / L;
    const std::int64_t j = i % L;
    const std::int64_t lo = b.values[static_cast<std::size_t>(k)];
    values[static_cast<std::size_t>(i)] = j == 0 ? lo * L : lo * (L - j) + b.values[static_cast<std::size_t>(k) + 1] * j;
  }
  return {std::move(times), std::move(values), c.clock().tick_shift(), 2 * mf - m};
}

void run_martingale(const ExperimentConfig& cfg, const std::vector<int>& levels, const std::vector<SeriesDef>& defs,
                    GeneratorKind kind, std::uint64_t rep_seed, RepResult& out) {
  const std::string tag(to_string(kind));
  const std::size_t i_e5 = index_of(defs, "E5:" + tag);
  const std::size_t i_e6a = index_of(defs, "E6a:" + tag);
  const std::size_t i_e6b = index_of(defs, "E6b:" + tag);
  if (i_e5 == defs.size() && i_e6a == defs.size()) return;

  GeneratorSpec spec = cfg.generator_template;
  spec.kind = kind;
  const std::uint64_t seed = derive(rep_seed, Tag::generator, kind_index(kind));
  AssembleOptions opts;
  opts.ticks_per_fine_step = cfg.ticks_per_fine_step;
  opts.coarse_levels = levels;
  const MartingaleInstance inst = assemble_martingale(spec, seed, Level(cfg.m_fine), cfg.horizon, opts);
  check_martingale(inst, levels, cfg.horizon, cfg.duality_samples, seed, out.exact);

  const TimeChange& c = inst.time_change();
  const int ts = c.clock().tick_shift();
  const PiecewiseLinear qv = c.as_function();
  const PiecewiseLinear M = inst.path.as_function();
  bool short_m = false;
  const DyadicRational K = clip(cfg.horizon, c.total_real_ticks(), ts, short_m);

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const int m = levels[li];
    const StoppingSequence tau = martingale_crossing_times(inst.path, Level(m));
    if (i_e5 < defs.size()) {
      const StepFunction n_m = discrete_qvar(tau, c.clock()).as_function(c.total_real_ticks());
      out.errors[i_e5][li] = sup_distance(qv, n_m, K).to_double();
      if (short_m || inst.truncated) out.truncated[i_e5] = true;
    }
    if (i_e6a < defs.size()) {
      const StoppingSequence s = skorohod_times(inst.fine_walk(), Level(m));
      const EmbeddedWalk b = embedded_walk(inst.fine_walk(), s, Level(m));
      const PiecewiseLinear on_clock = embedded_on_clock(b.values, c, cfg.m_fine);
      bool short_a = short_m;
      const DyadicRational Ka = clip(K, on_clock.times().back(), ts, short_a);
      out.errors[i_e6a][li] = sup_distance(M, on_clock, Ka).to_double();
      if (short_a || inst.truncated) out.truncated[i_e6a] = true;

      std::vector<std::int64_t> vals(b.values.values.begin(), b.values.values.end());
      const StepFunction on_count(tau.times, std::move(vals), c.total_real_ticks(), ts, m);
      out.errors[i_e6b][li] = sup_distance(M, on_count, K).to_double();
      if (short_m || inst.truncated) out.truncated[i_e6b] = true;
    }
  }
}

IndependenceResult run_independence_rep(const ExperimentConfig& cfg, GeneratorKind kind, std::uint64_t rep_seed,
                                        bool& truncated) {
  GeneratorSpec spec = cfg.generator_template;
  spec.kind = kind;
  const int level = cfg.effective_indep_level();
  const std::uint64_t seed = derive(rep_seed, Tag::independence, kind_index(kind));
  AssembleOptions opts;
  opts.ticks_per_fine_step = cfg.ticks_per_fine_step;
  opts.coarse_levels = {level};
  opts.min_coarse_crossings = cfg.indep_crossings;
  const MartingaleInstance inst = assemble_martingale(spec, seed, Level(cfg.m_fine), cfg.horizon, opts);
  const StoppingSequence tau = martingale_crossing_times(inst.path, Level(level));
  const StoppingSequence s = skorohod_times(inst.fine_walk(), Level(level));
  const EmbeddedWalk b = embedded_walk(inst.fine_walk(), s, Level(level));
  const std::int64_t n = std::min(cfg.indep_crossings, tau.count());
  truncated = n < cfg.indep_crossings;
  std::vector<int> signs(static_cast<std::size_t>(n));
  std::vector<double> gaps(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < signs.size(); ++k) {
    signs[k] = static_cast<int>(b.values.values[k + 1] - b.values.values[k]);
    gaps[k] = static_cast<double>(tau.times[k + 1] - tau.times[k]);
  }
  return independence_test(signs, gaps, {cfg.indep_shuffles, seed});
}

/// Runs task(i) for i in [0, n) on `jobs` threads; rethrows the lowest-index failure.
void parallel_for(int n, int jobs, const std::function<void(int)>& task) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

BoundQuery query_for(const ExperimentConfig& cfg, const SeriesDef& def, int m) {
  BoundQuery q;
  q.id = def.bound;
  q.K = cfg.horizon.to_double();
  q.m = m;
  q.C = cfg.C;
  if (def.generator) {
    GeneratorSpec spec = cfg.generator_template;
    spec.kind = *def.generator;
    q.a_m = truncation_level(spec, q.K);
  }
  return q;
}

}  // namespace

// ---------------------------------------------------------------------------

ReportFormat parse_format(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  if (text == "text") return ReportFormat::text;
  throw UsageError("unknown format '" + std::string(text) + "' (json, csv or text)");
}

std::vector<int> ExperimentConfig::effective_levels() const {
  if (!levels.empty()) return levels;
  std::vector<int> out;
  for (int m = 3; m <= m_fine - 4; ++m) out.push_back(m);
  return out;
}

int ExperimentConfig::effective_indep_level() const { return indep_level.value_or(m_fine - 3); }

void ExperimentConfig::validate() const {
  if (m_fine < 2) throw UsageError("m_fine must be at least 2");
  if (m_fine > 20) throw ResourceError("m_fine above 20 exceeds the step budget");
  const auto lv = effective_levels();
  if (lv.empty()) throw UsageError("no levels to run; pass --levels for m_fine below 7");
  for (int m : lv) {
    if (m < 1 || m >= m_fine) throw UsageError("level " + std::to_string(m) + " outside 1..m_fine-1");
  }
  if (!std::is_sorted(lv.begin(), lv.end()) || std::adjacent_find(lv.begin(), lv.end()) != lv.end()) {
    throw UsageError("levels must be strictly increasing");
  }
  if (horizon.numerator <= 0 || horizon.log2_denominator < 0) throw UsageError("horizon must be positive");
  if (replications < 1) throw UsageError("at least one replication required");
  if (!(C >= 1.5)) throw UsageError("C must be at least 3/2");
  if (jobs < 1) throw UsageError("jobs must be positive");
  if (duality_samples < 0) throw UsageError("duality samples must be non-negative");
  const int il = effective_indep_level();
  if (il < 1 || il >= m_fine) throw UsageError("independence level outside 1..m_fine-1");
  if (indep_crossings < 64) throw UsageError("independence test needs at least 64 crossings");
  if (indep_replications < 1 || indep_shuffles < 1) throw UsageError("independence replications and shuffles must be positive");
  if (!(indep_alpha > 0.0 && indep_alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  MicroClock check(Level(m_fine), ticks_per_fine_step);
  (void)check;
}

std::vector<int> parse_levels(const std::string& text) {
  auto to_int = [&](std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw UsageError("bad level list '" + text + "'");
    return v;
  };
  std::vector<int> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const int a = to_int(std::string_view(text).substr(0, dots));
    const int b = to_int(std::string_view(text).substr(dots + 2));
    if (a > b) throw UsageError("empty level range '" + text + "'");
    for (int m = a; m <= b; ++m) out.push_back(m);
    return out;
  }
  std::string_view rest(text);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    out.push_back(to_int(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw UsageError("empty level list");
  return out;
}

bool ExperimentReport::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

const Series* ExperimentReport::find(const std::string& id) const {
  for (const auto& s : series) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

ExactSummary run_exact_suite(const ExperimentConfig& config, std::uint64_t replication_seed) {
  config.validate();
  ExactSummary out;
  const std::uint64_t fseed = derive(replication_seed, Tag::family, 0);
  check_family(build_nested(fseed, Level(config.m_fine), config.horizon), fseed, out);
  const auto levels = config.effective_levels();
  for (GeneratorKind g : config.generators) {
    GeneratorSpec spec = config.generator_template;
    spec.kind = g;
    const std::uint64_t seed = derive(replication_seed, Tag::generator, kind_index(g));
    AssembleOptions opts;
    opts.ticks_per_fine_step = config.ticks_per_fine_step;
    opts.coarse_levels = levels;
    check_martingale(assemble_martingale(spec, seed, Level(config.m_fine), config.horizon, opts), levels,
                     config.horizon, config.duality_samples, seed, out);
  }
  return out;
}

ExperimentReport run_experiments(const ExperimentConfig& config, Suite suite) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = config;
  report.suite = suite;
  const auto levels = config.effective_levels();
  const auto defs = series_for(config, suite);

  if (!defs.empty()) {
    const int reps = config.replications;
    for (int r = 0; r < reps; ++r) report.replication_seeds.push_back(derive(config.seed, Tag::replication, static_cast<std::uint64_t>(r)));
    std::vector<RepResult> results(static_cast<std::size_t>(reps));
    const bool construct = suite == Suite::all || suite == Suite::construct;
    parallel_for(reps, config.jobs, [&](int r) {
      RepResult& res = results[static_cast<std::size_t>(r)];
      res.errors.assign(defs.size(), std::vector<double>(levels.size(), 0.0));
      res.truncated.assign(defs.size(), false);
      res.vertex_agreement.assign(levels.size(), 1.0);
      const std::uint64_t rs = report.replication_seeds[static_cast<std::size_t>(r)];
      if (construct) run_construct(config, levels, defs, rs, res);
      for (GeneratorKind g : config.generators) run_martingale(config, levels, defs, g, rs, res);
    });

    for (std::size_t d = 0; d < defs.size(); ++d) {
      Series s;
      s.id = defs[d].id;
      s.quantity = defs[d].quantity;
      s.bound = defs[d].bound;
      s.normalizer = defs[d].normalizer;
      for (std::size_t li = 0; li < levels.size(); ++li) {
        LevelStats ls;
        ls.m = levels[li];
        for (const auto& res : results) ls.errors.push_back(res.errors[d][li]);
        ls.min = *std::min_element(ls.errors.begin(), ls.errors.end());
        ls.max = *std::max_element(ls.errors.begin(), ls.errors.end());
        ls.median = median(ls.errors);
        const BoundResult b = eval_bound(query_for(config, defs[d], ls.m));
        ls.envelope = b.envelope;
        ls.probability = b.probability;
        ls.probability_clamped = b.clamped;
        ls.violations = static_cast<int>(std::count_if(ls.errors.begin(), ls.errors.end(), [&](double e) { return e > b.envelope; }));
        ls.informational = ls.m < config.bound_check_min_level;
        if (s.id == "E4") {
          double worst = 1.0;
          for (const auto& res : results) worst = std::min(worst, res.vertex_agreement[li]);
          ls.vertex_agreement = worst;
        }
        if (defs[d].generator) ls.c_m_ratio = ls.median / (c_m(ls.m) * rate_shape(defs[d].normalizer, ls.m));
        s.levels.push_back(std::move(ls));
      }
      for (const auto& res : results) s.truncated += res.truncated[d] ? 1 : 0;
      for (std::size_t li = 1; li < s.levels.size(); ++li) {
        if (s.levels[li].median >= s.levels[li - 1].median) ++s.inversions;
      }
      std::vector<int> fl;
      std::vector<double> fe;
      for (const auto& ls : s.levels) {
        if (ls.m >= kFitMinLevel && ls.m <= config.m_fine - 4) {
          fl.push_back(ls.m);
          fe.push_back(ls.median);
        }
      }
      if (fl.size() >= 3) s.fit = fit_rate(fl, fe, s.normalizer);
      report.series.push_back(std::move(s));
    }
    for (const auto& res : results) add(report.exact, res.exact);
  }

  if (suite == Suite::all || suite == Suite::indep) {
    for (GeneratorKind g : config.indep_generators) {
      IndependenceSummary sum;
      sum.generator = g;
      sum.level = config.effective_indep_level();
      sum.crossings = config.indep_crossings;
      sum.alpha = config.indep_alpha;
      const int reps = config.indep_replications;
      std::vector<IndependenceResult> res(static_cast<std::size_t>(reps));
      std::vector<char> trunc(static_cast<std::size_t>(reps), 0);
      parallel_for(reps, config.jobs, [&](int r) {
        bool t = false;
        res[static_cast<std::size_t>(r)] =
            run_independence_rep(config, g, derive(config.seed, Tag::replication, static_cast<std::uint64_t>(r)), t);
        trunc[static_cast<std::size_t>(r)] = t ? 1 : 0;
      });
      for (std::size_t r = 0; r < res.size(); ++r) {
        sum.statistics.push_back(res[r].statistic);
        sum.p_values.push_back(res[r].p_value);
        if (res[r].p_value <= config.indep_alpha) ++sum.rejections;
        sum.truncated += trunc[r];
      }
      report.independence.push_back(std::move(sum));
    }
  }

  report.verdicts = judge(report);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ExperimentReport run_convergence(const ExperimentConfig& config) { return run_experiments(config, Suite::all); }

std::vector<Verdict> judge(const ExperimentReport& report) {
  std::vector<Verdict> out;
  const auto& cfg = report.config;
  for (const auto& s : report.series) {
    int judged = 0;
    int bad = 0;
    for (const auto& ls : s.levels) {
      if (ls.informational) continue;
      judged += static_cast<int>(ls.errors.size());
      bad += ls.violations;
    }
    if (judged > 0) {
      out.push_back({s.id + " envelope (" + std::string(to_string(s.bound)) + ")", bad == 0,
                     std::to_string(bad) + " violations in " + std::to_string(judged) + " judged errors"});
    }
    if (s.levels.size() >= 2) {
      out.push_back({s.id + " monotone median", s.inversions <= 1, std::to_string(s.inversions) + " inversions"});
    }
    if (s.fit) {
      std::optional<std::pair<double, double>> window;
      if (s.id == "E5:g1" || s.id == "E5:g3") window = {-1.15, -0.85};
      if (s.id.starts_with("E6a:") || s.id.starts_with("E6b:")) window = {-0.75, -0.35};
      if (window) {
        const double slope = s.fit->slope;
        out.push_back({s.id + " rate", slope >= window->first && slope <= window->second,
                       "slope " + num(slope) + " against [" + num(window->first) + ", " + num(window->second) + "]"});
      }
    }
    if (s.id == "E4") {
      double worst = 1.0;
      for (const auto& ls : s.levels) worst = std::min(worst, ls.vertex_agreement.value_or(1.0));
      out.push_back({"E4 vertex agreement", worst == 1.0, "smallest agreement " + num(worst)});
    }
  }

  // sup|M - B_m(N_m)| <= sup|M - B_m(<M>)| + 2 qvar envelope, per replication.
  for (GeneratorKind g : cfg.generators) {
    const std::string tag(to_string(g));
    const Series* a = report.find("E6a:" + tag);
    const Series* b = report.find("E6b:" + tag);
    if (a == nullptr || b == nullptr) continue;
    int bad = 0;
    GeneratorSpec spec = cfg.generator_template;
    spec.kind = g;
    for (std::size_t li = 0; li < a->levels.size(); ++li) {
      BoundQuery q;
      q.id = BoundId::qvar_a;
      q.K = cfg.horizon.to_double();
      q.m = a->levels[li].m;
      q.C = cfg.C;
      q.a_m = truncation_level(spec, q.K);
      const double slack = 2.0 * eval_bound(q).envelope;
      for (std::size_t r = 0; r < a->levels[li].errors.size(); ++r) {
        if (b->levels[li].errors[r] > a->levels[li].errors[r] + slack) ++bad;
      }
    }
    out.push_back({"E6 triangle:" + tag, bad == 0, std::to_string(bad) + " replications above the triangle bound"});
  }

  for (const auto& ind : report.independence) {
    const auto reps = static_cast<std::int64_t>(ind.p_values.size());
    const std::string tag(to_string(ind.generator));
    if (ind.generator == GeneratorKind::g4_sign_dependent) {
      const double power = static_cast<double>(ind.rejections) / static_cast<double>(reps);
      out.push_back({"E7 power:" + tag, power >= 0.95, "rejection rate " + num(power) + " (needs >= 0.95)"});
    } else {
      auto [lo, hi] = binomial_interval(reps, ind.alpha, 0.99);
      out.push_back({"E7 size:" + tag, ind.rejections >= lo && ind.rejections <= hi,
                     std::to_string(ind.rejections) + " rejections, 99% band [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string suite_name(Suite s) {
  switch (s) {
    case Suite::construct:
      return "construct";
    case Suite::qvar:
      return "qvar";
    case Suite::approx:
      return "approx";
    case Suite::indep:
      return "indep";
    case Suite::all:
      return "all";
  }
  return "?";
}

nlohmann::ordered_json finite(double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(); }

std::string render_json(const ExperimentReport& r) {
  using json = nlohmann::ordered_json;
  const auto& c = r.config;
  auto names = [](const std::vector<GeneratorKind>& gs) {
    json a = json::array();
    for (GeneratorKind g : gs) a.push_back(std::string(to_string(g)));
    return a;
  };
  json doc;
  doc["suite"] = suite_name(r.suite);
  doc["config"] = {
      {"seed", c.seed},
      {"m_fine", c.m_fine},
      {"levels", c.effective_levels()},
      {"horizon", c.horizon.str()},
      {"replications", c.replications},
      {"generators", names(c.generators)},
      {"g2_map", c.generator_template.g2_map.str()},
      {"C", c.C},
      {"bound_check_min_level", c.bound_check_min_level},
      {"ticks_per_fine_step", c.ticks_per_fine_step},
      {"duality_samples", c.duality_samples},
      {"indep_generators", names(c.indep_generators)},
      {"indep_level", c.effective_indep_level()},
      {"indep_crossings", c.indep_crossings},
      {"indep_replications", c.indep_replications},
      {"indep_alpha", c.indep_alpha},
      {"indep_shuffles", c.indep_shuffles},
  };
  doc["replication_seeds"] = r.replication_seeds;
  doc["exact"] = {{"refinement", r.exact.refinement_checks},
                  {"embedding", r.exact.embedding_checks},
                  {"counting", r.exact.counting_checks},
                  {"nesting", r.exact.nesting_checks},
                  {"duality", r.exact.duality_checks}};
  json series = json::array();
  for (const auto& s : r.series) {
    json js = {{"id", s.id},
               {"quantity", s.quantity},
               {"bound", std::string(to_string(s.bound))},
               {"normalizer", std::string(to_string(s.normalizer))},
               {"inversions", s.inversions},
               {"truncated", s.truncated}};
    if (s.fit) {
      js["fit"] = {{"slope", finite(s.fit->slope)},
                   {"intercept", finite(s.fit->intercept)},
                   {"max_residual", finite(s.fit->max_residual)},
                   {"slope_stderr", finite(s.fit->slope_stderr)}};
    } else {
      js["fit"] = nullptr;
    }
    json levels = json::array();
    for (const auto& l : s.levels) {
      json jl = {{"m", l.m},
                 {"min", finite(l.min)},
                 {"median", finite(l.median)},
                 {"max", finite(l.max)},
                 {"envelope", finite(l.envelope)},
                 {"probability", finite(l.probability)},
                 {"probability_clamped", l.probability_clamped},
                 {"violations", l.violations},
                 {"informational", l.informational}};
      if (l.vertex_agreement) jl["vertex_agreement"] = *l.vertex_agreement;
      if (l.c_m_ratio) jl["c_m_ratio"] = finite(*l.c_m_ratio);
      jl["errors"] = l.errors;
      levels.push_back(std::move(jl));
    }
    js["levels"] = std::move(levels);
    series.push_back(std::move(js));
  }
  doc["series"] = std::move(series);
  json indep = json::array();
  for (const auto& ind : r.independence) {
    indep.push_back({{"generator", std::string(to_string(ind.generator))},
                     {"level", ind.level},
                     {"crossings", ind.crossings},
                     {"alpha", ind.alpha},
                     {"rejections", ind.rejections},
                     {"truncated", ind.truncated},
                     {"statistics", ind.statistics},
                     {"p_values", ind.p_values}});
  }
  doc["independence"] = std::move(indep);
  json verdicts = json::array();
  for (const auto& v : r.verdicts) verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  doc["verdicts"] = std::move(verdicts);
  doc["passed"] = r.passed();
  return doc.dump(2) + "\n";
}

std::string render_csv(const ExperimentReport& r) {
  std::ostringstream o;
  o << "exp_id,m,rep,sup_error,envelope,violated,seed\n";
  for (const auto& s : r.series) {
    for (const auto& l : s.levels) {
      for (std::size_t rep = 0; rep < l.errors.size(); ++rep) {
        o << s.id << ',' << l.m << ',' << rep << ',' << num(l.errors[rep]) << ',' << num(l.envelope) << ','
          << (l.errors[rep] > l.envelope ? 1 : 0) << ',' << r.replication_seeds[rep] << '\n';
      }
    }
  }
  return o.str();
}

std::string render_independence_csv(const ExperimentReport& r) {
  std::ostringstream o;
  o << "generator,level,rep,statistic,p_value,rejected,seed\n";
  for (const auto& ind : r.independence) {
    for (std::size_t rep = 0; rep < ind.p_values.size(); ++rep) {
      o << to_string(ind.generator) << ',' << ind.level << ',' << rep << ',' << num(ind.statistics[rep]) << ','
        << num(ind.p_values[rep]) << ',' << (ind.p_values[rep] <= ind.alpha ? 1 : 0) << ','
        << derive(r.config.seed, Tag::replication, rep) << '\n';
    }
  }
  return o.str();
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string render_text(const ExperimentReport& r) {
  const auto& c = r.config;
  std::ostringstream o;
  o << "nestwalk " << suite_name(r.suite) << ": seed " << c.seed << ", m_fine " << c.m_fine << ", K "
    << c.horizon.str() << ", " << c.replications << " replications, C " << fixed(c.C, 4) << "\n";
  o << "exact checks: refinement " << r.exact.refinement_checks << ", embedding " << r.exact.embedding_checks
    << ", counting " << r.exact.counting_checks << ", nesting " << r.exact.nesting_checks << ", duality "
    << r.exact.duality_checks << " (all passed)\n";
  for (const auto& s : r.series) {
    o << "\n" << s.id << "  " << s.quantity << "  [bound " << to_string(s.bound) << "]";
    if (s.truncated > 0) o << "  truncated in " << s.truncated << " replications";
    o << "\n";
    o << "  " << pad("m", 4) << pad("min", 13) << pad("median", 13) << pad("max", 13) << pad("envelope", 13)
      << "violations\n";
    for (const auto& l : s.levels) {
      o << "  " << pad(std::to_string(l.m), 4) << pad(fixed(l.min, 6), 13) << pad(fixed(l.median, 6), 13)
        << pad(fixed(l.max, 6), 13) << pad(fixed(l.envelope, 6), 13) << l.violations
        << (l.informational ? " (informational)" : "");
      if (l.vertex_agreement) o << "  vertex agreement " << fixed(*l.vertex_agreement, 6);
      if (l.c_m_ratio) o << "  median/(c_m shape) " << fixed(*l.c_m_ratio, 4);
      o << "\n";
    }
    if (s.fit) {
      o << "  fit log2(e/" << to_string(s.normalizer) << ") ~ m: slope " << fixed(s.fit->slope, 4) << " +- "
        << fixed(s.fit->slope_stderr, 3) << ", intercept " << fixed(s.fit->intercept, 4) << ", max residual "
        << fixed(s.fit->max_residual, 3) << "\n";
    }
  }
  for (const auto& ind : r.independence) {
    o << "\nE7:" << to_string(ind.generator) << "  level " << ind.level << ", n " << ind.crossings << ", "
      << ind.p_values.size() << " replications: " << ind.rejections << " rejections at alpha "
      << fixed(ind.alpha, 3);
    if (ind.truncated > 0) o << " (" << ind.truncated << " short of n)";
    o << "\n";
  }
  o << "\nverdicts\n";
  for (const auto& v : r.verdicts) o << "  " << (v.pass ? "PASS " : "FAIL ") << pad(v.name, 32) << v.detail << "\n";
  o << "\noverall: " << (r.passed() ? "PASS" : "FAIL") << "   runtime " << fixed(r.runtime_seconds, 3) << " s\n";
  return o.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + p.string());
  out << content;
  if (!out) throw ResourceError("write failed for " + p.string());
}

}  // namespace

std::string render_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json:
      return render_json(report);
    case ReportFormat::csv:
      return render_csv(report);
    case ReportFormat::text:
      return render_text(report);
  }
  return {};
}

std::filesystem::path emit_report(const ExperimentReport& report, ReportFormat format) {
  const bool no_series = report.series.empty() && report.independence.empty();
  const bool empty_reps = report.replication_seeds.empty() && report.independence.empty();
  bool empty_level = false;
  for (const auto& s : report.series) {
    for (const auto& l : s.levels) empty_level = empty_level || l.errors.empty();
  }
  if (no_series || empty_reps || empty_level) throw UsageError("report has no replications to emit");

  const auto& dir = report.config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ResourceError("cannot create output directory " + dir.string());
  const char* ext = format == ReportFormat::json ? "report.json" : format == ReportFormat::csv ? "report.csv" : "report.txt";
  const auto path = dir / ext;
  write_file(path, render_report(report, format));
  if (format == ReportFormat::csv && !report.independence.empty()) {
    write_file(dir / "independence.csv", render_independence_csv(report));
  }
  return path;
}

std::string bounds_table(const BoundsGridOptions& options, ReportFormat format) {
  std::ostringstream o;
  if (format == ReportFormat::csv) o << "id,K,m,C,envelope,probability,clamped\n";
  if (format == ReportFormat::text) {
    o << pad("id", 12) << pad("K", 8) << pad("m", 4) << pad("envelope", 14) << pad("probability", 14) << "\n";
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (BoundId id : all_bounds()) {
    if (id == BoundId::hoeffding) continue;
    for (double K : options.horizons) {
      for (int m : options.levels) {
        BoundQuery q;
        q.id = id;
        q.K = K;
        q.m = m;
        q.C = options.C;
        const BoundResult b = eval_bound(q);
        const std::string name(to_string(id));
        if (format == ReportFormat::csv) {
          o << name << ',' << num(K) << ',' << m << ',' << num(options.C) << ',' << num(b.envelope) << ','
            << num(b.probability) << ',' << (b.clamped ? 1 : 0) << '\n';
        } else if (format == ReportFormat::text) {
          o << pad(name, 12) << pad(fixed(K, 4), 8) << pad(std::to_string(m), 4) << pad(fixed(b.envelope, 6), 14)
            << pad(fixed(b.probability, 6), 14) << (b.clamped ? "clamped" : "") << "\n";
        } else {
          rows.push_back({{"id", name}, {"K", K}, {"m", m}, {"C", options.C}, {"envelope", b.envelope},
                          {"probability", b.probability}, {"clamped", b.clamped}});
        }
      }
    }
  }
  if (format == ReportFormat::json) {
    o << rows.dump(2) << "\n";
  }
  return o.str();
}

}  // namespace nestwalk
