// specvol: simulate noisy observations, estimate integrated (co)volatility,
// run Monte Carlo studies and the reference efficiency table.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numeric-domain
// error, 1 anything else.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "specvol/errors.hpp"
#include "specvol/estimators_1d.hpp"
#include "specvol/estimators_md.hpp"
#include "specvol/io.hpp"
#include "specvol/montecarlo.hpp"
#include "specvol/simulator.hpp"

namespace {

using namespace specvol;

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t reps = 1000;
  std::string estimator;
  std::string out;
  int threads = 1;
  std::string format = "json";
  std::string input;
  std::string paths_out;
  int h_inv = 0;
  int max_frequency = 0;
  double level = 0.95;
  int p = 0;
  int q = 1;
  std::string noise_norm = "empirical";
  std::string leverage;
};

LeverageCoupling leverage_from(const std::string& name, LeverageCoupling fallback) {
  if (name.empty()) return fallback;
  if (name == "conditional") return LeverageCoupling::conditional;
  if (name == "independent") return LeverageCoupling::independent;
  throw ConfigError("leverage coupling must be conditional or independent");
}

// Writes to --out or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

ScenarioConfig scenario_from(const Common& c) {
  ScenarioConfig s = c.config.empty() ? ScenarioConfig::constant_1d(30000, 1.0, 0.01, 25)
                                      : load_scenario(c.config);
  if (c.seed_given) s.seed = c.seed;
  return s;
}

MdOptions md_options(const Common& c) {
  MdOptions o;
  o.h_inv = c.h_inv;
  o.max_frequency = c.max_frequency;
  if (c.noise_norm == "continuous") o.norm = NoiseNorm::continuous;
  else if (c.noise_norm != "empirical") throw ConfigError("noise norm must be empirical or continuous");
  return o;
}

int run_simulate(const Common& c) {
  const ScenarioConfig s = scenario_from(c);
  Rng rng(stream_seed(s.seed, 0));
  const PathBundle paths = simulate_paths(s, rng);
  const ObservationSet obs = sample_noisy_observations(paths, s, rng);
  Sink sink(c.out);
  write_observations_csv(sink.stream(), obs);
  if (!c.paths_out.empty()) {
    Sink p(c.paths_out);
    write_paths_csv(p.stream(), paths);
  }
  return 0;
}

int run_estimate(const Common& c) {
  if (c.input.empty()) throw ConfigError("estimate needs an observation CSV (--input)");
  const ObservationSet obs = read_observations_csv_file(c.input);
  const std::string name = c.estimator.empty() ? (obs.dimension() == 1 ? "iv" : "lmm") : c.estimator;
  Sink sink(c.out);
  std::ostream& out = sink.stream();
  if (name == "iv" || name == "iv_adaptive") {
    Iv1dOptions o;
    o.h_inv = c.h_inv;
    o.max_frequency = c.max_frequency;
    const EstimateReport r = estimate_iv_adaptive(obs, o);
    if (c.format == "csv") write_report_csv(out, r, c.level);
    else out << report_to_json(r, c.level).dump(2) << '\n';
  } else if (name == "icv") {
    const EstimateReport r = estimate_icv(obs, c.p, c.q, md_options(c));
    if (c.format == "csv") write_report_csv(out, r, c.level);
    else out << report_to_json(r, c.level).dump(2) << '\n';
  } else if (name == "lmm") {
    const LmmReport r = estimate_lmm(obs, md_options(c));
    if (c.format == "csv") write_lmm_report_csv(out, r, c.level);
    else out << lmm_report_to_json(r).dump(2) << '\n';
  } else {
    throw ConfigError("estimate supports iv, icv and lmm, got '" + name + "'");
  }
  return 0;
}

std::vector<McEstimator> parse_estimators(const std::string& list, int d) {
  std::vector<McEstimator> out;
  if (list.empty()) {
    if (d == 1) return {McEstimator::iv_oracle, McEstimator::iv_adaptive};
    return {McEstimator::icv, McEstimator::lmm};
  }
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_estimator(item));
  return out;
}

int run_montecarlo(const Common& c) {
  const ScenarioConfig s = scenario_from(c);
  McOptions o;
  o.reps = c.reps;
  o.master_seed = s.seed;
  o.threads = c.threads;
  o.estimators = parse_estimators(c.estimator, s.d);
  o.level = c.level;
  o.p = c.p;
  o.q = c.q;
  o.iv.h_inv = c.h_inv;
  o.iv.max_frequency = c.max_frequency;
  o.md = md_options(c);
  o.leverage = leverage_from(c.leverage, LeverageCoupling::conditional);
  const McReport report = run_monte_carlo(s, o);
  write_mc_summary(std::cerr, report);
  Sink sink(c.out);
  if (c.format == "csv") {
    std::ostream& out = sink.stream();
    out << "estimator,rep,estimate,variance,truth,ci_hit\n";
    for (const auto& res : report.results)
      for (std::size_t r = 0; r < res.records.size(); ++r) {
        const auto& rec = res.records[r];
        out << to_string(res.estimator) << ',' << r << ',' << rec.estimate << ',' << rec.variance
            << ',' << rec.truth << ',' << (rec.ci_hit ? 1 : 0) << '\n';
      }
  } else {
    sink.stream() << mc_report_to_json(report).dump(2) << '\n';
  }
  return 0;
}

int run_table1_cmd(const Common& c) {
  McOptions o;
  o.reps = c.reps;
  o.master_seed = c.seed_given ? c.seed : 1;
  o.threads = c.threads;
  o.level = c.level;
  o.leverage = leverage_from(c.leverage, LeverageCoupling::independent);
  const auto spec = table1_rows();
  std::vector<Table1Result> rows;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    rows.push_back(run_table1_row(o, spec[i], i));
    write_table1(std::cerr, {rows.back()});
  }
  Sink sink(c.out);
  if (c.format == "csv") write_table1_csv(sink.stream(), rows);
  else if (c.format == "json") sink.stream() << table1_to_json(rows).dump(2) << '\n';
  else write_table1(sink.stream(), rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral estimation of integrated volatility and covolatility"};
  app.require_subcommand(1);
  Common c;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "Scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { c.seed = v; c.seed_given = true; }, "Master seed");
    sub->add_option("--out", c.out, "Output file (default stdout)");
    sub->add_option("--format", c.format, "Output format")
        ->check(CLI::IsMember({"csv", "json", "table"}));
  };

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario and emit observation CSV");
  add_common(sim);
  sim->add_option("--paths", c.paths_out, "Also write the latent paths as CSV");

  auto* est = app.add_subcommand("estimate", "Estimate from an observation CSV");
  add_common(est);
  est->add_option("--input,input", c.input, "Observation CSV")->check(CLI::ExistingFile);
  est->add_option("--estimator", c.estimator, "iv, icv or lmm");
  est->add_option("--h-inv", c.h_inv, "Number of bins (0 = automatic)");
  est->add_option("--max-frequency", c.max_frequency, "Frequency cap (0 = all)");
  est->add_option("--level", c.level, "Confidence level");
  est->add_option("--p", c.p, "First component of icv");
  est->add_option("--q", c.q, "Second component of icv");
  est->add_option("--noise-norm", c.noise_norm, "empirical or continuous");

  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo study of a scenario");
  add_common(mc);
  mc->add_option("--reps", c.reps, "Replications")->check(CLI::Range(2, 100000000));
  mc->add_option("--estimator", c.estimator,
                 "Comma list of iv_oracle, iv_adaptive, icv, icv_oracle, lmm, lmm_oracle");
  mc->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  mc->add_option("--h-inv", c.h_inv, "Number of bins (0 = scenario value)");
  mc->add_option("--max-frequency", c.max_frequency, "Frequency cap (0 = all)");
  mc->add_option("--level", c.level, "Confidence level");
  mc->add_option("--p", c.p, "Reported entry row");
  mc->add_option("--q", c.q, "Reported entry column");
  mc->add_option("--noise-norm", c.noise_norm, "empirical or continuous");
  mc->add_option("--leverage-coupling", c.leverage,
                 "conditional (default) or independent signal noise for leverage models");

  auto* tab = app.add_subcommand("table1", "Relative efficiencies of the twelve reference configurations");
  add_common(tab);
  tab->add_option("--reps", c.reps, "Replications per row")->check(CLI::Range(2, 100000000));
  tab->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  tab->add_option("--leverage-coupling", c.leverage,
                  "independent (default) or conditional signal noise for leverage rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*sim) return run_simulate(c);
    if (*est) return run_estimate(c);
    if (*mc) return run_montecarlo(c);
    if (*tab) return run_table1_cmd(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericDomainError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const ArgumentError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
