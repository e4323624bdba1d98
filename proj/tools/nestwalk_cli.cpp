#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "nestwalk/binary_io.hpp"
#include "nestwalk/embedding.hpp"
#include "nestwalk/errors.hpp"
#include "nestwalk/harness.hpp"
#include "nestwalk/rng.hpp"

namespace {

using namespace nestwalk;

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kResource = 3 };

struct Options {
  std::uint64_t seed = 1;
  int m_fine = 10;
  std::string levels;
  std::string horizon = "1";
  int reps = 50;
  std::vector<std::string> gens;
  std::string g2_map;
  double C = 3.0;
  std::filesystem::path out;
  std::string format = "text";
  int jobs = 1;
  int bound_min_level = 6;
  std::int64_t ticks = 4;
  int duality = 100;
  std::vector<std::string> indep_gens;
  int indep_level = -1;
  std::int64_t indep_n = 65536;
  int indep_reps = 200;
  double alpha = 0.01;
  std::int64_t shuffles = 10000;
  std::filesystem::path export_stops;
  std::filesystem::path dump;
};

std::vector<GeneratorKind> kinds(const std::vector<std::string>& names) {
  std::vector<GeneratorKind> out;
  for (const auto& n : names) out.push_back(parse_generator(n));
  return out;
}

ExperimentConfig to_config(const Options& o) {
  ExperimentConfig c;
  c.seed = o.seed;
  c.m_fine = o.m_fine;
  if (!o.levels.empty()) c.levels = parse_levels(o.levels);
  try {
    c.horizon = DyadicRational::parse(o.horizon);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  c.replications = o.reps;
  if (!o.gens.empty()) c.generators = kinds(o.gens);
  if (!o.g2_map.empty()) c.generator_template.g2_map = DeterministicMap::parse(o.g2_map);
  c.C = o.C;
  c.output_dir = o.out;
  c.format = parse_format(o.format);
  c.jobs = o.jobs;
  c.bound_check_min_level = o.bound_min_level;
  c.ticks_per_fine_step = o.ticks;
  c.duality_samples = o.duality;
  if (!o.indep_gens.empty()) c.indep_generators = kinds(o.indep_gens);
  if (o.indep_level >= 0) c.indep_level = o.indep_level;
  c.indep_crossings = o.indep_n;
  c.indep_replications = o.indep_reps;
  c.indep_alpha = o.alpha;
  c.indep_shuffles = o.shuffles;
  return c;
}

void export_stops(const ExperimentConfig& c, Suite suite, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create " + dir.string());
  const auto levels = c.effective_levels();
  for (int r = 0; r < c.replications; ++r) {
    const std::uint64_t rs = derive(c.seed, Tag::replication, static_cast<std::uint64_t>(r));
    const std::string rep = "_r" + std::to_string(r) + ".csv";
    if (suite == Suite::construct || suite == Suite::all) {
      const NestedWalkFamily f = build_nested(derive(rs, Tag::family, 0), Level(c.m_fine), c.horizon);
      const MicroClock clock(Level(c.m_fine), c.ticks_per_fine_step);
      const DyadicPath& w = f.shrunken[static_cast<std::size_t>(c.m_fine)];
      for (int m : levels) {
        const StoppingSequence s = skorohod_times(w, Level(m));
        const EmbeddedWalk b = embedded_walk(w, s, Level(m));
        write_stopping_csv(dir / ("family_m" + std::to_string(m) + rep), s, b.values.values, clock);
      }
    }
    if (suite == Suite::construct) continue;
    for (GeneratorKind g : c.generators) {
      GeneratorSpec spec = c.generator_template;
      spec.kind = g;
      AssembleOptions opts;
      opts.ticks_per_fine_step = c.ticks_per_fine_step;
      opts.coarse_levels = levels;
      const MartingaleInstance inst = assemble_martingale(spec, derive(rs, Tag::generator, static_cast<std::uint64_t>(g)),
                                                          Level(c.m_fine), c.horizon, opts);
      for (int m : levels) {
        const StoppingSequence tau = martingale_crossing_times(inst.path, Level(m));
        const EmbeddedWalk b = embedded_walk(inst.fine_walk(), skorohod_times(inst.fine_walk(), Level(m)), Level(m));
        write_stopping_csv(dir / ("stops_" + std::string(to_string(g)) + "_m" + std::to_string(m) + rep), tau,
                           b.values.values, inst.time_change().clock());
      }
    }
  }
}

void write_dump(const ExperimentConfig& c, Suite suite, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + file.string());
  const std::uint64_t rep0 = derive(c.seed, Tag::replication, 0);
  if (suite == Suite::construct || suite == Suite::all) {
    write_family(out, build_nested(derive(rep0, Tag::family, 0), Level(c.m_fine), c.horizon));
    return;
  }
  GeneratorSpec spec = c.generator_template;
  spec.kind = c.generators.front();
  const std::uint64_t seed = derive(rep0, Tag::generator, static_cast<std::uint64_t>(spec.kind));
  write_martingale(out, assemble_martingale(spec, seed, Level(c.m_fine), c.horizon), seed, c.horizon);
}

int run(const Options& o, Suite suite) {
  const ExperimentConfig c = to_config(o);
  const ExperimentReport report = run_experiments(c, suite);
  if (!o.export_stops.empty()) export_stops(c, suite, o.export_stops);
  if (!o.dump.empty()) write_dump(c, suite, o.dump);
  if (o.out.empty()) {
    std::cout << render_report(report, c.format);
  } else {
    const auto path = emit_report(report, c.format);
    std::cout << render_report(report, ReportFormat::text) << "report written to " << path.string() << "\n";
  }
  return report.passed() ? kPass : kFail;
}

int run_bounds(const Options& o) {
  ExperimentConfig c = to_config(o);
  BoundsGridOptions grid;
  grid.levels = o.levels.empty() ? std::vector<int>{} : parse_levels(o.levels);
  if (grid.levels.empty()) {
    for (int m = 1; m <= c.m_fine; ++m) grid.levels.push_back(m);
  }
  grid.horizons = {c.horizon.to_double()};
  grid.C = c.C;
  const std::string table = bounds_table(grid, c.format);
  if (o.out.empty()) {
    std::cout << table;
    return kPass;
  }
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  const char* name = c.format == ReportFormat::json ? "bounds.json" : c.format == ReportFormat::csv ? "bounds.csv" : "bounds.txt";
  std::ofstream f(o.out / name, std::ios::binary);
  if (ec || !f) throw ResourceError("cannot write into " + o.out.string());
  f << table;
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested random-walk approximation of Brownian motion and continuous martingales"};
  app.set_config("--config", "", "flat key = value file mirroring the long flags; flags override it");
  app.require_subcommand(1);
  Options o;
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--m-fine", o.m_fine, "finest level")->check(CLI::Range(2, 20));
  app.add_option("--levels", o.levels, "levels as a..b or a list (default 3..m_fine-4)");
  app.add_option("--horizon", o.horizon, "horizon K as p, p/2^q or p/d");
  app.add_option("--reps", o.reps, "replications")->check(CLI::PositiveNumber);
  app.add_option("--gen", o.gens, "generators g1..g4")->delimiter(',');
  app.add_option("--g2-map", o.g2_map, "G2 clock breakpoints t:f,... (default f(t) = t/2)");
  app.add_option("--c-const", o.C, "bound constant C");
  app.add_option("--out", o.out, "output directory (default: print to stdout)");
  app.add_option("--format", o.format, "json, csv or text")->check(CLI::IsMember({"json", "csv", "text"}));
  app.add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--bound-min-level", o.bound_min_level, "lowest level whose envelope violations are judged");
  app.add_option("--ticks", o.ticks, "micro-ticks per fine step (power of two)");
  app.add_option("--duality-samples", o.duality, "random intrinsic times per replication in the duality suite");
  app.add_option("--indep-gen", o.indep_gens, "generators for the independence test")->delimiter(',');
  app.add_option("--indep-level", o.indep_level, "level of the independence test (default m_fine-3)");
  app.add_option("--indep-n", o.indep_n, "crossings per independence replication");
  app.add_option("--indep-reps", o.indep_reps, "independence replications");
  app.add_option("--alpha", o.alpha, "independence test level");
  app.add_option("--shuffles", o.shuffles, "permutations per independence test");
  app.add_option("--export-stops", o.export_stops, "directory for stopping-time CSVs, one per generator, level and replication");
  app.add_option("--dump", o.dump, "binary dump of replication 0's walks");

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"construct", "E1-E4 on the twist-and-shrink family"},
      {"qvar", "E5 discrete quadratic variation"},
      {"approx", "E6 martingale approximation by B_m(<M>) and B_m(N_m)"},
      {"indep", "E7 sign/duration independence test"},
      {"bounds", "table of bound envelopes and probabilities"},
      {"all", "every experiment"},
  };
  for (const auto& [name, help] : subs) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "bounds") return run_bounds(o);
    const Suite suite = sub == "construct" ? Suite::construct
                        : sub == "qvar"    ? Suite::qvar
                        : sub == "approx"  ? Suite::approx
                        : sub == "indep"   ? Suite::indep
                                           : Suite::all;
    return run(o, suite);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return kResource;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kResource;
  } catch (const IdentityViolation& e) {
    std::cerr << "exact identity violated: " << e.what() << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
}
