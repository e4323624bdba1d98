#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nestwalk/errors.hpp"
#include "nestwalk/harness.hpp"
#include "nestwalk/rng.hpp"

using namespace nestwalk;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 5;
  c.m_fine = 8;
  c.levels = {3, 4, 5, 6};
  c.replications = 4;
  c.generators = {GeneratorKind::g1_bm, GeneratorKind::g2_deterministic, GeneratorKind::g3_independent,
                  GeneratorKind::g4_sign_dependent};
  c.duality_samples = 20;
  c.indep_level = 5;
  c.indep_crossings = 256;
  c.indep_replications = 4;
  c.indep_shuffles = 200;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("level lists parse as ranges or lists") {
  CHECK(parse_levels("3..6") == std::vector<int>{3, 4, 5, 6});
  CHECK(parse_levels("4,6,8") == std::vector<int>{4, 6, 8});
  CHECK(parse_levels("5") == std::vector<int>{5});
  CHECK_THROWS_AS(parse_levels("6..3"), UsageError);
  CHECK_THROWS_AS(parse_levels("a..3"), UsageError);
  CHECK_THROWS_AS(parse_levels("3,,4"), UsageError);
}

TEST_CASE("default levels and configuration checks") {
  ExperimentConfig c;
  CHECK(c.effective_levels() == std::vector<int>{3, 4, 5, 6});
  CHECK(c.effective_indep_level() == 7);
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto&& edit) {
    ExperimentConfig x;
    edit(x);
    return x;
  };
  CHECK_THROWS_AS(bad([](auto& x) { x.m_fine = 21; }).validate(), ResourceError);
  CHECK_THROWS_AS(bad([](auto& x) { x.C = 1.2; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](auto& x) { x.replications = 0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](auto& x) { x.levels = {5, 4}; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](auto& x) { x.levels = {10}; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](auto& x) { x.ticks_per_fine_step = 3; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](auto& x) { x.indep_alpha = 0.0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](auto& x) { x.m_fine = 6; }).validate(), UsageError);
  CHECK(parse_format("csv") == ReportFormat::csv);
  CHECK_THROWS_AS(parse_format("xml"), UsageError);
}

TEST_CASE("reports do not depend on the number of workers") {
  ExperimentConfig a = small_config();
  ExperimentConfig b = small_config();
  b.jobs = 3;
  const ExperimentReport ra = run_experiments(a, Suite::all);
  const ExperimentReport rb = run_experiments(b, Suite::all);
  CHECK(render_report(ra, ReportFormat::json) != "");
  // the config echo carries no job count, so whole documents must match
  CHECK(render_report(ra, ReportFormat::json) == render_report(rb, ReportFormat::json));
  CHECK(render_report(ra, ReportFormat::csv) == render_report(rb, ReportFormat::csv));
}

TEST_CASE("same config, same bytes") {
  ExperimentConfig c = small_config();
  c.generators = {GeneratorKind::g1_bm};
  c.levels = {3, 4, 5, 6};
  c.replications = 1;
  const auto once = render_report(run_experiments(c, Suite::qvar), ReportFormat::json);
  const auto twice = render_report(run_experiments(c, Suite::qvar), ReportFormat::json);
  CHECK(once == twice);
}

TEST_CASE("emission writes one csv row per experiment, level and replication") {
  ExperimentConfig c = small_config();
  c.output_dir = fresh_dir("nestwalk_emit_test");
  const ExperimentReport r = run_experiments(c, Suite::all);
  const auto path = emit_report(r, ReportFormat::csv);
  const std::string csv = slurp(path);
  const auto rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 1 + static_cast<long>(r.series.size() * c.levels.size()) * c.replications);
  CHECK(csv.starts_with("exp_id,m,rep,sup_error,envelope,violated,seed\n"));
  const std::string indep = slurp(c.output_dir / "independence.csv");
  CHECK(std::count(indep.begin(), indep.end(), '\n') == 1 + 2 * c.indep_replications);

  // two emissions of the same report are identical
  const auto json_path = emit_report(r, ReportFormat::json);
  const std::string first = slurp(json_path);
  emit_report(r, ReportFormat::json);
  CHECK(slurp(json_path) == first);
  CHECK(slurp(emit_report(r, ReportFormat::text)).find("overall:") != std::string::npos);
  std::filesystem::remove_all(c.output_dir);
}

TEST_CASE("empty reports are refused before touching the disk") {
  ExperimentReport r;
  r.config.output_dir = fresh_dir("nestwalk_empty_test");
  CHECK_THROWS_AS(emit_report(r, ReportFormat::json), UsageError);
  CHECK_FALSE(std::filesystem::exists(r.config.output_dir));
}

TEST_CASE("unwritable output directories are resource errors") {
  ExperimentConfig c = small_config();
  c.replications = 1;
  c.generators = {GeneratorKind::g1_bm};
  const auto blocker = fresh_dir("nestwalk_blocker");
  std::ofstream(blocker) << "x";
  c.output_dir = blocker / "sub";
  const ExperimentReport r = run_experiments(c, Suite::qvar);
  CHECK_THROWS_AS(emit_report(r, ReportFormat::json), ResourceError);
  std::filesystem::remove(blocker);
}

TEST_CASE("exact suite exercises every identity") {
  ExperimentConfig c = small_config();
  const ExactSummary s = run_exact_suite(c, derive(c.seed, Tag::replication, 0));
  CHECK(s.refinement_checks > 0);
  CHECK(s.embedding_checks > 0);
  CHECK(s.counting_checks > 0);
  CHECK(s.nesting_checks > 0);
  CHECK(s.duality_checks == 20 * 4);
}

TEST_CASE("verdicts for the independence dichotomy") {
  ExperimentReport r;
  IndependenceSummary g3;
  g3.generator = GeneratorKind::g3_independent;
  g3.p_values.assign(200, 0.5);
  g3.rejections = 6;
  IndependenceSummary g4;
  g4.generator = GeneratorKind::g4_sign_dependent;
  g4.p_values.assign(200, 0.0);
  g4.rejections = 190;
  r.independence = {g3, g4};
  auto v = judge(r);
  REQUIRE(v.size() == 2);
  CHECK(v[0].pass);
  CHECK(v[1].pass);
  r.independence[0].rejections = 7;
  r.independence[1].rejections = 189;
  v = judge(r);
  CHECK_FALSE(v[0].pass);
  CHECK_FALSE(v[1].pass);
}

TEST_CASE("verdicts for envelopes, monotonicity and rate windows") {
  ExperimentReport r;
  r.config.generators = {GeneratorKind::g1_bm};
  Series s;
  s.id = "E5:g1";
  s.bound = BoundId::qvar_a;
  for (int m : {4, 5, 6, 7}) {
    LevelStats l;
    l.m = m;
    l.errors = {std::exp2(-m)};
    l.median = l.errors[0];
    l.envelope = 1.0;
    l.informational = m < 6;
    s.levels.push_back(l);
  }
  s.fit = RateFit{-1.0, 0.0, 0.0, 0.0};
  r.series.push_back(s);
  auto names = [](const std::vector<Verdict>& v) {
    int fails = 0;
    for (const auto& x : v) fails += x.pass ? 0 : 1;
    return fails;
  };
  CHECK(names(judge(r)) == 0);
  r.series[0].fit->slope = -1.2;
  CHECK(names(judge(r)) == 1);
  r.series[0].fit->slope = -1.0;
  r.series[0].levels[0].violations = 1;  // informational level
  CHECK(names(judge(r)) == 0);
  r.series[0].levels[3].violations = 1;
  CHECK(names(judge(r)) == 1);
  r.series[0].levels[3].violations = 0;
  r.series[0].inversions = 2;
  CHECK(names(judge(r)) == 1);
}

TEST_CASE("quadratic variation medians shrink by about half per level") {
  ExperimentConfig c;
  c.seed = 3;
  c.levels = {4, 5, 6};
  c.generators = {GeneratorKind::g1_bm};
  c.duality_samples = 0;
  const ExperimentReport r = run_experiments(c, Suite::qvar);
  const Series* s = r.find("E5:g1");
  REQUIRE(s != nullptr);
  for (std::size_t i = 0; i + 1 < s->levels.size(); ++i) {
    const double m = s->levels[i].m;
    const double ratio = s->levels[i + 1].median / s->levels[i].median;
    const double expected = 0.5 * std::sqrt((m + 1) / m);
    CHECK(ratio < expected * 1.6);
    CHECK(ratio > expected / 1.6);
  }
  CHECK(s->levels.front().c_m_ratio.has_value());
}

TEST_CASE("bounds table has one row per bound, horizon and level") {
  BoundsGridOptions g;
  g.levels = {3, 4, 5};
  g.horizons = {1.0, 2.0};
  const std::string csv = bounds_table(g, ReportFormat::csv);
  const auto rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 1 + static_cast<long>(all_bounds().size() - 1) * 3 * 2);
  CHECK(bounds_table(g, ReportFormat::json).front() == '[');
}
