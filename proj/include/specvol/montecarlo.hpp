#pragma once

// Monte Carlo runner with a frozen volatility path, relative efficiency,
// coverage analysis and the reference table configurations.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "specvol/estimators_1d.hpp"
#include "specvol/estimators_md.hpp"
#include "specvol/simulator.hpp"

namespace specvol {

enum class McEstimator { iv_oracle, iv_adaptive, icv, icv_oracle, lmm, lmm_oracle };

const char* to_string(McEstimator e);
/// Throws ConfigError for unknown names.
McEstimator parse_estimator(const std::string& name);
bool is_multivariate(McEstimator e);

struct McOptions {
  std::size_t reps = 1000;
  std::uint64_t master_seed = 1;
  int threads = 1;  ///< 0 uses the hardware concurrency
  std::vector<McEstimator> estimators{McEstimator::iv_oracle};
  double level = 0.95;
  int p = 0;  ///< entry (p, q) reported by icv and lmm estimators
  int q = 1;
  Iv1dOptions iv;
  MdOptions md;
  LeverageCoupling leverage = LeverageCoupling::conditional;
};

/// One replication of one estimator at the final time.
struct McRecord {
  double estimate = 0.0;
  double variance = 0.0;  ///< variance estimate
  double truth = 0.0;
  bool ci_hit = false;
  Eigen::VectorXd studentized;  ///< lmm only: I_hat^{1/2}(LMM - vec truth)
};

struct McAggregate {
  double mean = 0.0;
  double truth = 0.0;
  double bias = 0.0;
  double variance = 0.0;  ///< population variance of the estimates
  double rmse = 0.0;      ///< rmse^2 = bias^2 + variance
  double mean_variance_estimate = 0.0;
  double avar = 0.0;      ///< asymptotic variance target at the final time
  double rate_n = 0.0;    ///< n in the sqrt(n) scaling of avar
  double re = 0.0;
  double coverage = 0.0;
  double coverage_lo = 0.0;
  double coverage_hi = 0.0;
  /// lmm only: sample variance of each studentized vec entry (target Z_ii).
  std::vector<double> studentized_variance;
};

struct McEstimatorResult {
  McEstimator estimator = McEstimator::iv_oracle;
  std::vector<McRecord> records;  ///< indexed by replication
  McAggregate aggregate;
};

struct McReport {
  ScenarioConfig scenario;
  McOptions options;
  std::size_t reps = 0;
  std::uint64_t master_seed = 0;
  double wall_seconds = 0.0;
  std::size_t clamp_count = 0;
  std::vector<McEstimatorResult> results;

  const McEstimatorResult& result(McEstimator e) const;
};

/// Runs options.reps replications. The volatility path is drawn once from
/// stream_seed(master, 0) and frozen; replication r draws its signal,
/// sampling times and noise from stream_seed(master, r + 1), so results do
/// not depend on the worker count. Throws ArgumentError for an estimator
/// that does not fit the scenario dimension.
McReport run_monte_carlo(const ScenarioConfig& scenario, const McOptions& options);

/// Aggregates records; `avar` and `rate_n` feed the relative efficiency.
McAggregate aggregate_records(const std::vector<McRecord>& records, double avar, double rate_n,
                              double level);

/// sqrt((bias^2 + variance) sqrt(n) / avar) = sqrt(rmse^2 sqrt(n) / avar).
double relative_efficiency(const McAggregate& aggregate, double avar, double rate_n);
double relative_efficiency(const McEstimatorResult& result);

struct CoverageResult {
  double rate = 0.0;
  double lo = 0.0;  ///< 95% Wilson interval
  double hi = 0.0;
  std::size_t hits = 0;
  std::size_t trials = 0;
};

/// Fraction of replications whose level-CI contains the truth; level 0 gives 0.
CoverageResult coverage_analysis(const McEstimatorResult& result, double level);

/// One row of the reference simulation table.
struct Table1Row {
  ScenarioConfig config;
  bool stochastic = false;
  double reference_oracle = 0.0;
  double reference_adaptive = 0.0;
};

/// The twelve configurations with their published relative efficiencies.
std::vector<Table1Row> table1_rows();

struct Table1Result {
  Table1Row row;
  double re_oracle = 0.0;
  double re_adaptive = 0.0;
  McReport report;
};

/// Runs iv_oracle and iv_adaptive on one row with master seed
/// stream_seed(options.master_seed, index). The leverage coupling is taken
/// from `options`.
Table1Result run_table1_row(const McOptions& options, const Table1Row& row, std::size_t index);
/// All rows, row r with index r.
std::vector<Table1Result> run_table1(const McOptions& options,
                                     const std::vector<Table1Row>& rows = table1_rows());

}  // namespace specvol
