// Acceptance run: one PASS/FAIL line per criterion, preceded by indented
// detail lines. Exit status 0 only when every criterion passes.
//
//   specvol_acceptance [--scale s] [--only 1,3,...] [--seed m]
//
// --scale multiplies every replication count (floored at 20) for quick runs.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "specvol/asymptotics.hpp"
#include "specvol/basis.hpp"
#include "specvol/estimators_1d.hpp"
#include "specvol/estimators_md.hpp"
#include "specvol/matrix_ops.hpp"
#include "specvol/montecarlo.hpp"
#include "specvol/observations.hpp"
#include "specvol/simulator.hpp"

namespace {

using namespace specvol;
constexpr double kPi = std::numbers::pi;

struct Settings {
  double scale = 1.0;
  std::uint64_t seed = 20240611;
  int threads = 0;
};

Settings settings;

std::size_t reps(std::size_t full) {
  return std::max<std::size_t>(20, static_cast<std::size_t>(std::llround(full * settings.scale)));
}

void detail(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  std::printf("    ");
  std::vprintf(fmt, args);
  std::printf("\n");
  va_end(args);
  std::fflush(stdout);
}

// Records a sub-check and returns its verdict.
bool check(bool& all, bool ok, const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  std::printf("    [%s] ", ok ? "ok" : "not ok");
  std::vprintf(fmt, args);
  std::printf("\n");
  va_end(args);
  std::fflush(stdout);
  all = all && ok;
  return ok;
}

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double se_of_mean(const std::vector<double>& v) {
  return std::sqrt(sample_var(v) / static_cast<double>(v.size()));
}

McOptions mc_options(std::size_t n_reps, std::vector<McEstimator> est, std::uint64_t stream) {
  McOptions o;
  o.reps = n_reps;
  o.master_seed = stream_seed(settings.seed, stream);
  o.threads = settings.threads;
  o.estimators = std::move(est);
  return o;
}

ScenarioConfig bivariate_poisson(std::size_t n, double rho) {
  ScenarioConfig c;
  c.n = n;
  c.d = 2;
  c.h_inv = default_bin_count(n);
  c.volatility.covolatility = Eigen::MatrixXd::Identity(2, 2);
  c.volatility.covolatility(0, 1) = c.volatility.covolatility(1, 0) = rho;
  c.noise.eta = {0.01};
  c.sampling = {SamplingScheme{SamplingScheme::Kind::poisson, 0.0}};
  return c;
}

// ---------------------------------------------------------------- 1

bool exact_identities() {
  bool all = true;
  const std::pair<std::size_t, int> configs[] = {{5000, 10}, {5000, 25}, {30000, 25}, {30000, 50}};
  for (const auto& [n, h_inv] : configs) {
    const BinGrid grid = BinGrid::regular(n, h_inv);
    const int nh = static_cast<int>(n / h_inv);
    const double h = grid.width();
    const int J = std::min(200, nh - 1);
    const double dn = static_cast<double>(n);
    double e1 = 0.0, e2 = 0.0, e3 = 0.0, e3c = 0.0;
    for (int k : {1, h_inv}) {
      Eigen::MatrixXd plain(J, n), shifted(J, n);
      for (int j = 1; j <= J; ++j)
        for (std::size_t i = 1; i <= n; ++i) {
          plain(j - 1, i - 1) = sine_basis_value(j, k, grid, i / dn);
          shifted(j - 1, i - 1) =
              weight_basis_value(j, k, grid, n, (i - 0.5) / dn, WeightBasisMode::discrete);
        }
      const Eigen::MatrixXd g1 = plain * plain.transpose() / dn;
      e1 = std::max(e1, max_abs(g1 - Eigen::MatrixXd::Identity(J, J)));

      const Eigen::MatrixXd g2 = shifted * shifted.transpose() / dn;
      const Eigen::MatrixXd sq = shifted.cwiseAbs2();
      const Eigen::MatrixXd g3 = sq * sq.transpose() / dn;
      std::vector<double> norm(J + 1);
      for (int j = 1; j <= J; ++j) {
        const double s = std::sin(j * kPi / (2.0 * nh));
        norm[j] = 4.0 * dn * dn * s * s;
      }
      for (int j = 1; j <= J; ++j)
        for (int m = 1; m <= J; ++m) {
          const double djm = j == m ? 1.0 : 0.0;
          const double t2 = djm * norm[j];
          e2 = std::max(e2, std::abs(g2(j - 1, m - 1) - t2) / std::sqrt(norm[j] * norm[m]));
          const double scale3 = std::sqrt(g3(j - 1, j - 1) * g3(m - 1, m - 1));
          const double printed =
              (2.0 + djm) * dn * dn * std::sin(j * kPi / nh) * std::sin(m * kPi / nh);
          e3 = std::max(e3, std::abs(g3(j - 1, m - 1) - printed) / scale3);
          const double derived =
              (2.0 + djm - (j + m == nh ? 1.0 : 0.0)) * norm[j] * norm[m] / (2.0 * h);
          e3c = std::max(e3c, std::abs(g3(j - 1, m - 1) - derived) / scale3);
        }
    }
    detail("n=%zu h^-1=%d j,m<=%d: orthogonality %.2e, shifted norms %.2e (relative), "
           "squared weights printed form %.2e, derived form %.2e (relative)",
           n, h_inv, J, e1, e2, e3, e3c);
    check(all, e1 < 1e-10, "<Phi_j, Phi_m>_n = delta_jm to 1e-10 (n=%zu, h^-1=%d)", n, h_inv);
    check(all, e2 < 1e-10, "[phi_j, phi_m]_n = delta_jm 4n^2 sin^2(j pi/2nh) to 1e-10 (n=%zu, h^-1=%d)",
          n, h_inv);
    check(all, e3 < 1e-10,
          "[phi_j^2, phi_m^2]_n = (2+delta_jm) n^2 sin(j pi/nh) sin(m pi/nh) to 1e-10 (n=%zu, h^-1=%d)",
          n, h_inv);
    if (e3c >= 1e-10) all = false;
    detail("derived form (2+delta_jm-delta_{j+m,nh}) [phi_j,phi_j][phi_m,phi_m]/(2h): %s",
           e3c < 1e-10 ? "holds" : "does not hold");
  }

  // summation by parts on 100 datasets cycling through the configurations
  std::mt19937_64 rng(stream_seed(settings.seed, 100));
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto [n, h_inv] = configs[rep % 4];
    const BinGrid grid = BinGrid::regular(n, h_inv);
    const int nh = static_cast<int>(n / h_inv);
    const FrequencyRange f = FrequencyRange::for_grid(grid, n, std::min(200, nh - 1));
    const double dn = static_cast<double>(n);
    std::vector<double> x(n + 1, 0.0), eps(n + 1), y(n + 1);
    for (std::size_t i = 1; i <= n; ++i) x[i] = x[i - 1] + z(rng) / std::sqrt(dn);
    for (std::size_t i = 0; i <= n; ++i) {
      eps[i] = 0.01 * z(rng);
      y[i] = x[i] + eps[i];
    }
    const SpectralArray sy = spectral_statistics(regular_observations(y), grid, f);
    const SpectralArray sx = spectral_statistics(regular_observations(x), grid, f);
    for (int k = 1; k <= h_inv; ++k)
      for (int j = 1; j <= f.j_max; ++j) {
        // [eps, phi_jk]_n pairs eps at (i-1)/n with phi_jk((i-1/2)/n); the
        // cosine argument is formed from the integer offset in the bin, since
        // rounding of (i-1/2)/n is amplified by j pi / h beyond 1e-12
        const double amp = 2.0 * dn * std::sqrt(2.0 * h_inv) * std::sin(j * kPi / (2.0 * nh));
        double sp = 0.0;
        for (int u = 1; u <= nh; ++u)
          sp += eps[static_cast<std::size_t>(k - 1) * nh + u - 1] * amp * std::cos(j * kPi * (u - 0.5) / nh);
        sp /= dn;
        worst = std::max(worst, std::abs(sy(k, j, 0) - (sx(k, j, 0) - sp)));
      }
  }
  check(all, worst < 1e-12, "summation by parts on 100 datasets: max deviation %.2e (limit 1e-12)", worst);
  return all;
}

// ---------------------------------------------------------------- 2

bool moment_identity() {
  bool all = true;
  const std::size_t n = 30000;
  const int h_inv = 25;
  const ScenarioConfig c = ScenarioConfig::constant_1d(n, 1.0, 0.01, h_inv);
  const BinGrid grid = BinGrid::regular(n, h_inv);
  const FrequencyRange f = FrequencyRange::for_grid(grid, n);
  const int js[] = {1, 5, 20, 50};
  const std::size_t draws = reps(2000);
  std::vector<std::vector<double>> sq(4);
  for (std::size_t r = 0; r < draws; ++r) {
    Rng rng(stream_seed(settings.seed, 200 + r));
    const PathBundle p = simulate_paths(c, rng);
    const SpectralArray s = spectral_statistics(sample_noisy_observations(p, c, rng), grid, f);
    for (int k = 1; k <= h_inv; ++k)
      for (int u = 0; u < 4; ++u) sq[u].push_back(s(k, js[u], 0) * s(k, js[u], 0));
  }
  for (int u = 0; u < 4; ++u) {
    const double expected = 1.0 + 1e-4 / n * discrete_weight_norm(js[u], n, grid);
    const double se = se_of_mean(sq[u]);
    const double dev = (mean(sq[u]) - expected) / se;
    check(all, std::abs(dev) < 4.0, "j=%d: mean S^2 %.5f, expected %.5f, %zu bin samples, %.2f SE",
          js[u], mean(sq[u]), expected, sq[u].size(), dev);
  }
  return all;
}

// ---------------------------------------------------------------- 3

bool table1() {
  bool all = true;
  const auto rows = table1_rows();
  McOptions o = mc_options(reps(1000), {}, 300);
  o.leverage = LeverageCoupling::independent;
  detail("%zu replications per row, leverage coupling %s", o.reps, to_string(o.leverage));
  std::vector<double> lambda_oracle;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Table1Row& row = rows[i];
    const bool constant = !row.stochastic && row.config.noise.eta[0] == 0.01;
    const bool lambda_row = row.stochastic && row.config.n == 30000 && row.config.h_inv == 25 &&
                            row.config.eta(0) == 0.01;
    if (!constant && !lambda_row) continue;
    const Table1Result r = run_table1_row(o, row, i);
    const double tol_o = constant ? 0.08 : 0.10, tol_a = constant ? 0.20 : 0.25;
    char label[96];
    if (constant)
      std::snprintf(label, sizeof label, "n=%zu sigma=1", row.config.n);
    else
      std::snprintf(label, sizeof label, "n=%zu stochastic lambda=%.1f", row.config.n,
                    row.config.volatility.leverage);
    check(all, std::abs(r.re_oracle - row.reference_oracle) <= tol_o, "%s oracle RE %.3f, reference %.2f +- %.2f",
          label, r.re_oracle, row.reference_oracle, tol_o);
    check(all, std::abs(r.re_adaptive - row.reference_adaptive) <= tol_a,
          "%s adaptive RE %.3f, reference %.2f +- %.2f", label, r.re_adaptive, row.reference_adaptive, tol_a);
    if (lambda_row) lambda_oracle.push_back(r.re_oracle);
  }
  double spread = 0.0;
  for (double a : lambda_oracle)
    for (double b : lambda_oracle) spread = std::max(spread, std::abs(a - b));
  check(all, spread < 0.1, "oracle RE across leverage rows differs by at most %.3f (limit 0.1)", spread);
  return all;
}

// ---------------------------------------------------------------- 4

bool in_band(double c) { return c >= 0.92 && c <= 0.97; }

bool coverage() {
  bool all = true;
  {
    const ScenarioConfig c = ScenarioConfig::constant_1d(30000, 1.0, 0.01, 25);
    const McReport r =
        run_monte_carlo(c, mc_options(reps(1000), {McEstimator::iv_oracle, McEstimator::iv_adaptive}, 400));
    for (const auto& res : r.results)
      check(all, in_band(res.aggregate.coverage), "1d %s n=30000: coverage %.3f over %zu reps",
            to_string(res.estimator), res.aggregate.coverage, r.reps);
  }
  const std::size_t n = 10000;
  const Eigen::MatrixXd z = symmetrizer_z(2);
  for (double rho : {0.0, 0.5}) {
    std::vector<McEstimator> est{McEstimator::icv, McEstimator::icv_oracle};
    if (rho == 0.0) est.push_back(McEstimator::lmm);
    const McReport r = run_monte_carlo(bivariate_poisson(n, rho), mc_options(reps(1000), est, static_cast<std::uint64_t>(410 + 10 * rho)));
    const McAggregate& icv = r.result(McEstimator::icv).aggregate;
    check(all, in_band(icv.coverage), "ICV rho=%.1f Poisson n=%zu: coverage %.3f over %zu reps", rho, n,
          icv.coverage, r.reps);
    detail("ICV oracle rho=%.1f: coverage %.3f", rho, r.result(McEstimator::icv_oracle).aggregate.coverage);
    if (rho == 0.0) {
      const McAggregate& lmm = r.result(McEstimator::lmm).aggregate;
      for (int i = 0; i < 4; ++i)
        detail("LMM Poisson n=%zu studentized vec entry %d: variance ratio to Z_ii %.3f", n, i,
               lmm.studentized_variance[i] / z(i, i));
    }
  }
  {
    ScenarioConfig c;
    c.n = 30000;
    c.d = 2;
    c.volatility.covolatility = Eigen::MatrixXd::Identity(2, 2);
    c.noise.eta = {0.01};
    const McReport r = run_monte_carlo(c, mc_options(reps(1000), {McEstimator::lmm}, 430));
    const McAggregate& lmm = r.result(McEstimator::lmm).aggregate;
    for (int i = 0; i < 4; ++i) {
      const double ratio = lmm.studentized_variance[i] / z(i, i);
      check(all, std::abs(ratio - 1.0) <= 0.15,
            "LMM d=2 Sigma=E_2 n=30000 studentized vec entry %d: variance %.3f, Z_ii %.0f (ratio %.3f)", i,
            lmm.studentized_variance[i], z(i, i), ratio);
    }
    detail("LMM entry (0,1) coverage %.3f over %zu reps", lmm.coverage, r.reps);
  }
  return all;
}

// ---------------------------------------------------------------- 5

bool matrix_algebra() {
  bool all = true;
  std::mt19937_64 rng(stream_seed(settings.seed, 500));
  std::normal_distribution<double> z;
  auto random_matrix = [&](int d) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = z(rng);
    return a;
  };
  auto rel = [](const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
    return max_abs(got - want) / std::max(1.0, max_abs(want));
  };
  for (int d : {1, 2, 3, 5}) {
    const MatrixOpsContext ctx(d);
    const Eigen::MatrixXd a = random_matrix(d), b = random_matrix(d), c = random_matrix(d),
                          e = random_matrix(d);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d * d, d * d);
    const Eigen::MatrixXd& cm = ctx.commutation();
    double worst = 0.0;
    worst = std::max(worst, rel(cm * vec(a), vec(a.transpose())));
    worst = std::max(worst, rel(cm * cm, id));
    worst = std::max(worst, rel(cm * kronecker(a, b) * cm, kronecker(b, a)));
    worst = std::max(worst, rel(ctx.z(), id + cm));
    worst = std::max(worst, rel(ctx.z() * vec(a), vec(a + a.transpose())));
    worst = std::max(worst, rel(kronecker(a, b) * kronecker(c, e), kronecker(a * c, b * e)));
    worst = std::max(worst, rel(vec(a * b * c), kronecker(c.transpose(), a) * vec(b)));
    worst = std::max(worst, rel(kronecker(a, b).transpose(), kronecker(a.transpose(), b.transpose())));
    const Eigen::MatrixXd half = 0.5 * ctx.z();
    const double idem = max_abs(half * half - half);
    check(all, worst < 1e-12, "d=%d commutation, Z and Kronecker identities: %.2e", d, worst);
    check(all, idem < 1e-12, "d=%d (Z/2)^2 = Z/2: %.2e", d, idem);
  }

  {
    const int d = 2;
    const std::size_t draws = 1000000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(4, 4);
    for (std::size_t r = 0; r < draws; ++r) {
      const Eigen::Vector2d x(z(rng), z(rng));
      const Eigen::VectorXd v = vec(x * x.transpose());
      sum += v;
      sum2.noalias() += v * v.transpose();
    }
    const Eigen::VectorXd m = sum / static_cast<double>(draws);
    const Eigen::MatrixXd cov = sum2 / static_cast<double>(draws) - m * m.transpose();
    const double dev = max_abs(cov - symmetrizer_z(d));
    check(all, dev < 5e-3, "Cov(vec(ZZ^T)) over 10^6 draws: max deviation from Z %.4f (limit 5e-3)", dev);
    detail("sampling sd of a diagonal entry is sqrt(56/10^6) = %.4f", std::sqrt(56e-6));
  }

  for (int d : {1, 2, 3, 5}) {
    const Eigen::MatrixXd a = random_matrix(d);
    const Eigen::MatrixXd s = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd h(d);
    for (int i = 0; i < d; ++i) h(i) = 0.005 + 0.01 * (i + 1);
    const Eigen::MatrixXd q = symmetric_matrix_power(s, 0.25);
    const double quarter = rel(q * q * q * q, s);
    const Eigen::MatrixXd root = noise_scaled_root(s, h);
    const Eigen::MatrixXd rq = symmetric_matrix_power(root, 0.25);
    const double root_quarter = rel(rq * rq * rq * rq, root);
    const Eigen::MatrixXd back = root * h.cwiseInverse().cwiseAbs2().asDiagonal() * root;
    const double root_back = rel(back, s);
    check(all, std::max({quarter, root_quarter, root_back}) < 1e-8,
          "d=%d quarter powers of Sigma and Sigma^H and Sigma^H H^-2 Sigma^H = Sigma: %.2e, %.2e, %.2e", d,
          quarter, root_quarter, root_back);
  }
  return all;
}

// ---------------------------------------------------------------- 6

bool cross_theorem() {
  bool all = true;
  std::mt19937_64 rng(stream_seed(settings.seed, 600));
  std::uniform_real_distribution<double> us(0.1, 3.0), ue(0.001, 0.1);
  double worst = 0.0;
  for (int r = 0; r < 20; ++r) {
    const double sigma = us(rng), eta = ue(rng);
    const Eigen::MatrixXd a =
        acov_lmm(Eigen::MatrixXd::Constant(1, 1, sigma * sigma), Eigen::VectorXd::Constant(1, eta), 1.0);
    const double total = (a * symmetrizer_z(1))(0, 0);
    const double target = 8.0 * eta * sigma * sigma * sigma;
    worst = std::max(worst, std::abs(total - target) / target);
  }
  check(all, worst < 1e-10, "d=1 LMM covariance times Z equals 8 eta |sigma|^3 on 20 pairs: %.2e", worst);

  ScenarioConfig c;
  c.n = 10000;
  c.d = 2;
  c.volatility.covolatility.resize(2, 2);
  c.volatility.covolatility << 1.0, 0.5, 0.5, 2.0;
  c.noise.eta = {0.0};
  const std::size_t R = reps(1000);
  std::vector<std::vector<double>> err(4);
  Eigen::MatrixXd avar;
  for (std::size_t r = 0; r < R; ++r) {
    Rng g(stream_seed(settings.seed, 610 + r));
    const PathBundle p = simulate_paths(c, g);
    const RealizedCovariance rc = realized_covariance_baseline(sample_noisy_observations(p, c, g), p.volatility);
    const Eigen::VectorXd e =
        std::sqrt(static_cast<double>(c.n)) * vec(rc.estimate - true_integrated_covolatility(p, 1.0));
    for (int i = 0; i < 4; ++i) err[i].push_back(e(i));
    avar = rc.avar;
  }
  for (int i = 0; i < 4; ++i) {
    const double ratio = sample_var(err[i]) / avar(i, i);
    check(all, std::abs(ratio - 1.0) <= 0.15,
          "realized covariance vec entry %d over %zu noise-free reps: variance %.3f, (Sigma(x)Sigma)Z %.3f (ratio %.3f)",
          i, R, sample_var(err[i]), avar(i, i), ratio);
  }
  return all;
}

// ---------------------------------------------------------------- 7

bool synchronisation() {
  bool all = true;
  const std::size_t n = 30000;
  const ScenarioConfig c = bivariate_poisson(n, 0.5);
  const std::size_t R = reps(300);
  const int caps[2] = {150, 50};
  std::vector<double> async, sync, diff, capped[2][2];
  for (std::size_t r = 0; r < R; ++r) {
    Rng g(stream_seed(settings.seed, 700 + r));
    const PathBundle p = simulate_paths(c, g);
    const ObservationSet obs = sample_noisy_observations(p, c, g);
    const ObservationSet synced = synchronize_previous_tick(obs);
    async.push_back(estimate_icv(obs, 0, 1).final_estimate());
    sync.push_back(estimate_icv(synced, 0, 1).final_estimate());
    diff.push_back(async.back() - sync.back());
    for (int i = 0; i < 2; ++i) {
      MdOptions o;
      o.max_frequency = caps[i];
      capped[i][0].push_back(estimate_icv(obs, 0, 1, o).final_estimate());
      capped[i][1].push_back(estimate_icv(synced, 0, 1, o).final_estimate());
    }
  }
  for (int i = 0; i < 2; ++i)
    detail("frequencies capped at %d: non-synchronous mean %.5f, previous-tick mean %.5f", caps[i],
           mean(capped[i][0]), mean(capped[i][1]));
  const double gap = mean(async) - mean(sync), se = se_of_mean(async);
  detail("Poisson n=%zu rho=0.5, %zu reps: non-synchronous mean %.5f, previous-tick mean %.5f", n, R,
         mean(async), mean(sync));
  detail("paired difference %.5f +- %.5f (SE)", mean(diff), se_of_mean(diff));
  check(all, std::abs(gap) < se, "difference of means %.5f within one MC standard error %.5f", gap, se);
  return all;
}

// ---------------------------------------------------------------- 8

bool rate() {
  bool all = true;
  auto rmse = [](std::size_t n, std::uint64_t stream) {
    const ScenarioConfig c = ScenarioConfig::constant_1d(n, 1.0, 0.01, default_bin_count(n));
    const McReport r = run_monte_carlo(c, mc_options(reps(500), {McEstimator::iv_oracle}, stream));
    detail("n=%zu h^-1=%d: oracle RMSE %.5f over %zu reps", n, c.h_inv, r.results[0].aggregate.rmse, r.reps);
    return r.results[0].aggregate.rmse;
  };
  const double ratio = rmse(5000, 800) / rmse(80000, 801);
  const double centre = std::pow(16.0, 0.25);
  check(all, ratio >= 0.7 * centre && ratio <= 1.3 * centre, "RMSE(5000)/RMSE(80000) = %.3f, band [%.2f, %.2f]",
        ratio, 0.7 * centre, 1.3 * centre);
  return all;
}

struct Criterion {
  int id;
  const char* name;
  bool (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria of the spectral volatility library"};
  std::vector<int> only;
  app.add_option("--scale", settings.scale, "Replication multiplier")->check(CLI::Range(0.001, 10.0));
  app.add_option("--seed", settings.seed, "Master seed");
  app.add_option("--threads", settings.threads, "Worker threads (0 = all cores)");
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const Criterion criteria[] = {
      {1, "exact identities of the sine bases and summation by parts", exact_identities},
      {2, "second moment of the spectral statistics", moment_identity},
      {3, "relative efficiencies of the reference table", table1},
      {4, "confidence interval coverage", coverage},
      {5, "matrix algebra", matrix_algebra},
      {6, "consistency of asymptotic covariances", cross_theorem},
      {7, "robustness to previous-tick synchronisation", synchronisation},
      {8, "convergence rate n^(1/4)", rate},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    std::printf("criterion %d: %s\n", c.id, c.name);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      detail("exception: %s", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.name, secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
