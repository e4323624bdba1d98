#pragma once

// Experiment orchestration.
//
//   E1  time lag sup_k |T_{m+1}(k) 4^{-(m+1)} - k 4^{-m}| and consecutive-level distance   (twist-shrink)
//   E2  sup |B~_{m_fine} - B~_m|
//   E3  sup_k |s_m(k) - k 4^{-m}| for the embedding of B~_{m_fine}
//   E4  vertex agreement of B_m with B~_m, and sup |B~_{m_fine} - B_m|
//   E5  sup |<M> - N_m|                                                   (per generator)
//   E6a sup |M - B_m(<M>)|,  E6b sup |M - B_m(N_m)|
//   E7  sign/gap permutation test of the level-m embedded walk
//   E8  time-change duality on random intrinsic times
//   E9  exact identities; any failure throws IdentityViolation
//
// Replication r draws everything from derive(seed, Tag::replication, r) and
// runs on one thread; results are merged in replication order, so reports do
// not depend on the number of workers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nestwalk/bounds.hpp"
#include "nestwalk/generators.hpp"
#include "nestwalk/stats.hpp"

namespace nestwalk {

enum class ReportFormat { json, csv, text };
ReportFormat parse_format(std::string_view text);

enum class Suite { construct, qvar, approx, indep, all };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int m_fine = 10;
  /// Empty means 3..m_fine-4.
  std::vector<int> levels;
  DyadicRational horizon{1, 0};
  int replications = 50;
  std::vector<GeneratorKind> generators{GeneratorKind::g1_bm};
  GeneratorSpec generator_template;
  double C = 3.0;
  /// Envelope violations below this level are reported but not judged.
  int bound_check_min_level = 6;
  std::int64_t ticks_per_fine_step = 4;
  /// Random intrinsic times per replication in the duality suite.
  int duality_samples = 100;

  std::vector<GeneratorKind> indep_generators{GeneratorKind::g3_independent, GeneratorKind::g4_sign_dependent};
  /// Empty means m_fine - 3.
  std::optional<int> indep_level;
  std::int64_t indep_crossings = 65536;
  int indep_replications = 200;
  double indep_alpha = 0.01;
  std::int64_t indep_shuffles = 10000;

  std::filesystem::path output_dir = ".";
  ReportFormat format = ReportFormat::text;
  int jobs = 1;

  [[nodiscard]] std::vector<int> effective_levels() const;
  [[nodiscard]] int effective_indep_level() const;
  /// Throws UsageError on an inconsistent configuration.
  void validate() const;
};

/// Parses "a..b" or a comma-separated list.
std::vector<int> parse_levels(const std::string& text);

struct LevelStats {
  int m = 0;
  /// One sup error per replication, in replication order.
  std::vector<double> errors;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
  double envelope = 0.0;
  double probability = 0.0;
  bool probability_clamped = false;
  int violations = 0;
  /// Below bound_check_min_level: violations do not count against the verdict.
  bool informational = false;
  /// E4 only: smallest fraction of level-m vertices where B_m equals B~_m.
  std::optional<double> vertex_agreement;
  /// E5/E6 only: median / (c_m * rate shape), with c_m = log2(m + 2) and shape
  /// m^{1/2} 2^{-m} (E5) or m 2^{-m/2} (E6).
  std::optional<double> c_m_ratio;
};

struct Series {
  /// e.g. "E2" or "E5:g3".
  std::string id;
  std::string quantity;
  BoundId bound = BoundId::wiener;
  Normalizer normalizer = Normalizer::none;
  std::vector<LevelStats> levels;
  std::optional<RateFit> fit;
  /// Number of m with median(e_{m+1}) >= median(e_m).
  int inversions = 0;
  /// Replications whose walk ran short of the horizon (the error is then measured on the covered part).
  int truncated = 0;
};

struct IndependenceSummary {
  GeneratorKind generator = GeneratorKind::g3_independent;
  int level = 0;
  std::int64_t crossings = 0;
  double alpha = 0.01;
  std::vector<double> statistics;
  std::vector<double> p_values;
  int rejections = 0;
  int truncated = 0;
};

struct ExactSummary {
  std::int64_t refinement_checks = 0;
  std::int64_t embedding_checks = 0;
  std::int64_t counting_checks = 0;
  std::int64_t nesting_checks = 0;
  std::int64_t duality_checks = 0;
};

struct Verdict {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct ExperimentReport {
  ExperimentConfig config;
  Suite suite = Suite::all;
  /// Replication seeds derive(seed, Tag::replication, r).
  std::vector<std::uint64_t> replication_seeds;
  std::vector<Series> series;
  std::vector<IndependenceSummary> independence;
  ExactSummary exact;
  std::vector<Verdict> verdicts;
  /// Wall-clock seconds; shown in text output only.
  double runtime_seconds = 0.0;

  [[nodiscard]] bool passed() const;
  [[nodiscard]] const Series* find(const std::string& id) const;
};

/// Runs the selected suite (E9 and E8 first, then the experiments).
ExperimentReport run_experiments(const ExperimentConfig& config, Suite suite);
ExperimentReport run_convergence(const ExperimentConfig& config);

/// E9 and E8 for one replication seed; returns the number of checks per identity.
ExactSummary run_exact_suite(const ExperimentConfig& config, std::uint64_t replication_seed);

/// Verdicts: envelope violations at judged levels, monotone medians, rate
/// windows and the independence dichotomy. Called by run_experiments.
std::vector<Verdict> judge(const ExperimentReport& report);

/// Rendered report; the same report always renders to the same bytes.
std::string render_report(const ExperimentReport& report, ReportFormat format);
/// Writes report.{json,csv,txt} into config.output_dir and returns the path.
/// Throws UsageError for an empty report, ResourceError if the directory is unwritable.
std::filesystem::path emit_report(const ExperimentReport& report, ReportFormat format);

struct BoundsGridOptions {
  std::vector<int> levels;
  std::vector<double> horizons{1.0};
  double C = 3.0;
};
/// One row per (theorem, K, m): envelope and probability.
std::string bounds_table(const BoundsGridOptions& options, ReportFormat format);

}  // namespace nestwalk
