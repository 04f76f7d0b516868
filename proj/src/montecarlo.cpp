#include "specvol/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "specvol/asymptotics.hpp"
#include "specvol/errors.hpp"
#include "specvol/matrix_ops.hpp"
#include "specvol/stats.hpp"

namespace specvol {

namespace {

struct Prepared {
  McOptions options;
  std::vector<double> sigma2_bins;            // iv oracle, regular bin edges
  std::vector<Eigen::MatrixXd> sigma_bins;    // md oracle, unit bin edges
  Eigen::VectorXd eta2;
  double z = 0.0;
};

bool hit(double estimate, double variance, double truth, double z) {
  if (!(variance > 0.0)) return false;
  return std::abs(estimate - truth) <= z * std::sqrt(variance);
}

McRecord scalar_record(const EstimateReport& r, double truth, double z) {
  McRecord rec;
  rec.estimate = r.final_estimate();
  rec.variance = r.final_variance();
  rec.truth = truth;
  rec.ci_hit = hit(rec.estimate, rec.variance, truth, z);
  return rec;
}

// Spectral statistics shared by the multivariate estimators of one replication.
struct Shared {
  std::optional<MdPreparation> adaptive;
  std::optional<SpectralArray> stats;

  const MdPreparation& prepared(const ObservationSet& obs, const MdOptions& o) {
    if (!adaptive) adaptive.emplace(prepare_multivariate(obs, o));
    return *adaptive;
  }
  const SpectralArray& statistics(const ObservationSet& obs, const MdOptions& o) {
    if (adaptive) return adaptive->stats;
    if (!stats) stats.emplace(multivariate_statistics(obs, o));
    return *stats;
  }
};

McRecord run_one(McEstimator e, const ObservationSet& obs, const VolatilityPath& vol,
                 const Prepared& prep, Shared& shared) {
  const McOptions& o = prep.options;
  switch (e) {
    case McEstimator::iv_oracle:
    case McEstimator::iv_adaptive: {
      EstimateReport r = e == McEstimator::iv_oracle
                             ? estimate_iv_oracle(obs, prep.sigma2_bins, prep.eta2(0), o.iv)
                             : estimate_iv_adaptive(obs, o.iv);
      const double truth = true_integrated_covolatility(vol, r.times.back())(0, 0);
      return scalar_record(r, truth, prep.z);
    }
    case McEstimator::icv:
    case McEstimator::icv_oracle: {
      EstimateReport r =
          e == McEstimator::icv_oracle
              ? estimate_icv_oracle(shared.statistics(obs, o.md), o.p, o.q, prep.sigma_bins,
                                    prep.eta2, o.md)
              : estimate_icv(shared.prepared(obs, o.md), o.p, o.q, o.md);
      const double truth = true_integrated_covolatility(vol, r.times.back())(o.p, o.q);
      return scalar_record(r, truth, prep.z);
    }
    case McEstimator::lmm:
    case McEstimator::lmm_oracle: {
      LmmReport r = e == McEstimator::lmm_oracle
                        ? estimate_lmm_oracle(shared.statistics(obs, o.md), prep.sigma_bins,
                                              prep.eta2, o.md)
                        : estimate_lmm(shared.prepared(obs, o.md), o.md);
      const Eigen::MatrixXd truth = true_integrated_covolatility(vol, r.times.back());
      McRecord rec;
      rec.estimate = r.final_matrix()(o.p, o.q);
      rec.variance = r.entry_variance(o.p, o.q);
      rec.truth = truth(o.p, o.q);
      rec.ci_hit = hit(rec.estimate, rec.variance, rec.truth, prep.z);
      rec.studentized = r.studentize(truth);
      return rec;
    }
  }
  throw ArgumentError("unknown estimator");
}

// Asymptotic variance of the reported scalar and the n of its sqrt(n) scaling.
std::pair<double, double> target(McEstimator e, const ScenarioConfig& s, const VolatilityPath& vol,
                                 const Prepared& prep, double t) {
  const McOptions& o = prep.options;
  switch (e) {
    case McEstimator::iv_oracle:
    case McEstimator::iv_adaptive: {
      const BinGrid grid = BinGrid::regular(s.n_component(0), o.iv.h_inv);
      return {avar_iv(vol, s.eta(0), std::min(t, grid.t_end())).scalar(),
              static_cast<double>(s.n_component(0))};
    }
    case McEstimator::icv:
    case McEstimator::icv_oracle: {
      Eigen::VectorXd eta = prep.eta2.cwiseSqrt();
      const std::size_t np = s.n_component(o.p), nq = s.n_component(o.q);
      return {avar_icv_riemann(prep.sigma_bins, eta, np, nq, o.p, o.q),
              static_cast<double>(std::min(np, nq))};
    }
    case McEstimator::lmm:
    case McEstimator::lmm_oracle: {
      std::vector<double> eta, nu;
      std::vector<SamplingScheme> schemes;
      for (int l = 0; l < s.d; ++l) {
        if (!(s.eta(l) > 0.0)) return {0.0, static_cast<double>(s.n)};
        eta.push_back(s.eta(l));
        nu.push_back(s.nu(l));
        schemes.push_back(s.scheme(l));
      }
      const Eigen::MatrixXd cov = acov_lmm(vol, eta, nu, schemes, t).value * symmetrizer_z(s.d);
      const int i = o.p + s.d * o.q;
      return {cov(i, i), static_cast<double>(s.n)};
    }
  }
  return {0.0, 0.0};
}

}  // namespace

const char* to_string(McEstimator e) {
  switch (e) {
    case McEstimator::iv_oracle: return "iv_oracle";
    case McEstimator::iv_adaptive: return "iv_adaptive";
    case McEstimator::icv: return "icv";
    case McEstimator::icv_oracle: return "icv_oracle";
    case McEstimator::lmm: return "lmm";
    case McEstimator::lmm_oracle: return "lmm_oracle";
  }
  return "?";
}

McEstimator parse_estimator(const std::string& name) {
  for (McEstimator e : {McEstimator::iv_oracle, McEstimator::iv_adaptive, McEstimator::icv,
                        McEstimator::icv_oracle, McEstimator::lmm, McEstimator::lmm_oracle})
    if (name == to_string(e)) return e;
  throw ConfigError("unknown estimator '" + name +
                    "' (iv_oracle, iv_adaptive, icv, icv_oracle, lmm, lmm_oracle)");
}

bool is_multivariate(McEstimator e) {
  return e != McEstimator::iv_oracle && e != McEstimator::iv_adaptive;
}

const McEstimatorResult& McReport::result(McEstimator e) const {
  for (const auto& r : results)
    if (r.estimator == e) return r;
  throw ArgumentError(std::string("report has no results for ") + to_string(e));
}

McAggregate aggregate_records(const std::vector<McRecord>& records, double avar, double rate_n,
                              double level) {
  McAggregate a;
  const std::size_t m = records.size();
  if (m == 0) return a;
  const double dm = static_cast<double>(m);
  double sum = 0.0, truth = 0.0, var_est = 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) {
    sum += r.estimate;
    truth += r.truth;
    var_est += r.variance;
    hits += r.ci_hit ? 1 : 0;
  }
  a.mean = sum / dm;
  a.truth = truth / dm;
  a.mean_variance_estimate = var_est / dm;
  double err_sum = 0.0;
  for (const auto& r : records) err_sum += r.estimate - r.truth;
  a.bias = err_sum / dm;
  double var = 0.0;
  for (const auto& r : records) {
    const double c = (r.estimate - r.truth) - a.bias;
    var += c * c;
  }
  a.variance = var / dm;
  a.rmse = std::sqrt(a.bias * a.bias + a.variance);
  a.avar = avar;
  a.rate_n = rate_n;
  a.re = avar > 0.0 ? relative_efficiency(a, avar, rate_n) : 0.0;
  a.coverage = level > 0.0 ? static_cast<double>(hits) / dm : 0.0;
  const auto [lo, hi] = wilson_interval(level > 0.0 ? hits : 0, m, 0.95);
  a.coverage_lo = lo;
  a.coverage_hi = hi;

  if (records.front().studentized.size() > 0) {
    const Eigen::Index len = records.front().studentized.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(len);
    for (const auto& r : records) mean += r.studentized;
    mean /= dm;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(len);
    for (const auto& r : records) sq += (r.studentized - mean).cwiseAbs2();
    sq /= dm;
    a.studentized_variance.assign(sq.data(), sq.data() + len);
  }
  return a;
}

double relative_efficiency(const McAggregate& aggregate, double avar, double rate_n) {
  if (!(avar > 0.0)) throw ArgumentError("asymptotic variance must be positive");
  const double mse = aggregate.bias * aggregate.bias + aggregate.variance;
  return std::sqrt(mse * std::sqrt(rate_n) / avar);
}

double relative_efficiency(const McEstimatorResult& result) {
  return relative_efficiency(result.aggregate, result.aggregate.avar, result.aggregate.rate_n);
}

CoverageResult coverage_analysis(const McEstimatorResult& result, double level) {
  if (!(level >= 0.0 && level < 1.0)) throw ArgumentError("coverage level must lie in [0, 1)");
  CoverageResult c;
  c.trials = result.records.size();
  if (level > 0.0) {
    const double z = normal_quantile(0.5 * (1.0 + level));
    for (const auto& r : result.records) c.hits += hit(r.estimate, r.variance, r.truth, z) ? 1 : 0;
  }
  c.rate = c.trials > 0 ? static_cast<double>(c.hits) / static_cast<double>(c.trials) : 0.0;
  const auto [lo, hi] = wilson_interval(c.hits, c.trials, 0.95);
  c.lo = lo;
  c.hi = hi;
  return c;
}

McReport run_monte_carlo(const ScenarioConfig& scenario, const McOptions& options) {
  scenario.validate();
  if (options.reps < 2) throw ArgumentError("Monte Carlo needs at least 2 replications");
  if (options.estimators.empty()) throw ArgumentError("no estimator selected");
  if (!(options.level > 0.0 && options.level < 1.0))
    throw ArgumentError("confidence level must lie in (0, 1)");
  const auto start = std::chrono::steady_clock::now();

  Prepared prep;
  prep.options = options;
  McOptions& o = prep.options;
  if (o.iv.h_inv == 0) o.iv.h_inv = scenario.h_inv;
  if (o.md.h_inv == 0) o.md.h_inv = scenario.h_inv;
  o.p = std::min(o.p, scenario.d - 1);
  o.q = std::min(o.q, scenario.d - 1);
  if (o.p < 0 || o.q < 0) throw ArgumentError("component pair must be nonnegative");
  for (McEstimator e : o.estimators)
    if (!is_multivariate(e) && scenario.d != 1)
      throw ArgumentError(std::string(to_string(e)) + " needs a one-dimensional scenario");
  prep.z = normal_quantile(0.5 * (1.0 + o.level));
  prep.eta2.resize(scenario.d);
  for (int l = 0; l < scenario.d; ++l) prep.eta2(l) = scenario.eta(l) * scenario.eta(l);

  Rng vol_rng(stream_seed(options.master_seed, 0));
  const VolatilityPath vol = simulate_volatility(scenario, vol_rng);

  if (scenario.d == 1) {
    const BinGrid grid = BinGrid::regular(scenario.n_component(0), o.iv.h_inv);
    prep.sigma2_bins = spot_variance_at_bin_edges(vol, grid.width(), grid.n_bins());
  }
  {
    const BinGrid grid = BinGrid::unit(o.md.h_inv);
    for (int k = 1; k <= grid.n_bins(); ++k) prep.sigma_bins.push_back(vol.at(grid.left(k)));
  }

  const std::size_t reps = o.reps;
  const std::size_t n_est = o.estimators.size();
  std::vector<std::vector<McRecord>> records(n_est, std::vector<McRecord>(reps));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= reps) return;
      try {
        Rng rng(stream_seed(options.master_seed, r + 1));
        PathBundle paths{vol, simulate_signal(scenario, vol, rng, o.leverage)};
        const ObservationSet obs = sample_noisy_observations(paths, scenario, rng);
        Shared shared;
        for (std::size_t e = 0; e < n_est; ++e)
          records[e][r] = run_one(o.estimators[e], obs, vol, prep, shared);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(reps);
        return;
      }
    }
  };
  int threads = o.threads > 0 ? o.threads
                              : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), reps));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  McReport report;
  report.scenario = scenario;
  report.options = o;
  report.reps = reps;
  report.master_seed = options.master_seed;
  report.clamp_count = vol.clamp_count;
  for (std::size_t e = 0; e < n_est; ++e) {
    McEstimatorResult res;
    res.estimator = o.estimators[e];
    res.records = std::move(records[e]);
    const double t = 1.0;
    const auto [avar, rate_n] = target(res.estimator, scenario, vol, prep, t);
    res.aggregate = aggregate_records(res.records, avar, rate_n, o.level);
    report.results.push_back(std::move(res));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<Table1Row> table1_rows() {
  std::vector<Table1Row> rows;
  auto constant = [&](std::size_t n, double oracle, double adaptive) {
    rows.push_back({ScenarioConfig::constant_1d(n, 1.0, 0.01, 25, 0.1), false, oracle, adaptive});
  };
  auto stochastic = [&](std::size_t n, int h_inv, double eta, double lambda, double oracle,
                        double adaptive) {
    rows.push_back({ScenarioConfig::stoch_vol_1d(n, eta, lambda, h_inv), true, oracle, adaptive});
  };
  constant(30000, 1.01, 1.43);
  constant(5000, 1.02, 1.47);
  stochastic(30000, 25, 0.01, 0.5, 1.09, 1.75);
  stochastic(30000, 25, 0.01, 0.2, 1.06, 1.77);
  stochastic(30000, 25, 0.01, 0.8, 1.09, 1.75);
  stochastic(30000, 25, 0.001, 0.5, 1.62, 1.88);
  stochastic(30000, 25, 0.1, 0.5, 1.20, 1.69);
  stochastic(30000, 50, 0.01, 0.5, 1.09, 1.84);
  stochastic(30000, 10, 0.01, 0.5, 1.16, 1.86);
  stochastic(5000, 25, 0.01, 0.5, 1.13, 1.92);
  stochastic(5000, 50, 0.01, 0.5, 1.08, 1.75);
  stochastic(5000, 10, 0.01, 0.5, 1.09, 1.87);
  return rows;
}

Table1Result run_table1_row(const McOptions& options, const Table1Row& row, std::size_t index) {
  McOptions o = options;
  o.estimators = {McEstimator::iv_oracle, McEstimator::iv_adaptive};
  o.master_seed = stream_seed(options.master_seed, index);
  o.iv.h_inv = row.config.h_inv;
  Table1Result r{row, 0.0, 0.0, run_monte_carlo(row.config, o)};
  r.re_oracle = r.report.result(McEstimator::iv_oracle).aggregate.re;
  r.re_adaptive = r.report.result(McEstimator::iv_adaptive).aggregate.re;
  return r;
}

std::vector<Table1Result> run_table1(const McOptions& options, const std::vector<Table1Row>& rows) {
  std::vector<Table1Result> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(run_table1_row(options, rows[i], i));
  return out;
}

}  // namespace specvol
