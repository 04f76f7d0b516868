#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "specvol/errors.hpp"
#include "specvol/estimators_1d.hpp"
#include "specvol/estimators_md.hpp"
#include "specvol/matrix_ops.hpp"
#include "specvol/simulator.hpp"
#include "support.hpp"

using namespace specvol;
using namespace specvol::testing;

namespace {

ScenarioConfig bivariate(std::size_t n, double rho, double eta, bool poisson = false) {
  ScenarioConfig c;
  c.n = n;
  c.d = 2;
  c.h_inv = 25;
  c.volatility.covolatility = Eigen::MatrixXd::Identity(2, 2);
  c.volatility.covolatility(0, 1) = c.volatility.covolatility(1, 0) = rho;
  c.noise.eta = {eta};
  if (poisson) c.sampling = {SamplingScheme{SamplingScheme::Kind::poisson, 0.0}};
  return c;
}

ObservationSet draw(const ScenarioConfig& c, Rng& rng) {
  const PathBundle p = simulate_paths(c, rng);
  return sample_noisy_observations(p, c, rng);
}

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

// Noise terms eta^2 [phi, phi]_n / n on a regular grid.
NoiseTerms discrete_noise(const BinGrid& grid, const FrequencyRange& f, std::size_t n,
                          const Eigen::VectorXd& eta2) {
  NoiseTerms out(grid.n_bins(), f.j_max, static_cast<int>(eta2.size()));
  for (int k = 1; k <= grid.n_bins(); ++k)
    for (int j = 1; j <= f.j_max; ++j)
      for (int p = 0; p < eta2.size(); ++p)
        out(k, j, p) = eta2(p) * discrete_weight_norm(j, n, grid) / static_cast<double>(n);
  return out;
}

}  // namespace

TEST_SUITE("estimators_md") {
  TEST_CASE("local noise level on an equidistant grid") {
    std::mt19937_64 rng(41);
    const std::size_t n = 3000;
    const ObservationSet obs = noisy_bm(n, 1.0, 0.01, rng);
    const BinGrid grid = BinGrid::unit(10);
    const NoiseLevelEstimate est = estimate_local_noise_levels(obs, grid);
    const double expected = estimate_noise_variance(obs[0]) / n;
    for (const auto& l : est.levels) CHECK(l(0) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(est.borrowed.empty());
  }

  TEST_CASE("local noise level in Monte Carlo mean") {
    std::mt19937_64 rng(42);
    const std::size_t n = 30000;
    const BinGrid grid = BinGrid::unit(25);
    double raw = 0.0, debiased = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
      const ObservationSet obs = noisy_bm(n, 1.0, 0.01, rng);
      const double level = estimate_local_noise_levels(obs, grid).levels[12](0);
      const double eta2 = estimate_noise_variance(obs[0]);
      raw += level / reps;
      debiased += level * debias_noise_variance(eta2, 1.0, n) / eta2 / reps;
    }
    // the raw level carries the signal share 1/(2n) of the noise variance estimate
    CHECK(raw == doctest::Approx((1e-4 + 0.5 / n) / n).epsilon(0.02));
    CHECK(debiased == doctest::Approx(1e-4 / n).epsilon(0.1));
  }

  TEST_CASE("local noise level follows the sampling density") {
    ScenarioConfig c = ScenarioConfig::constant_1d(30000, 1.0, 0.01, 25);
    c.sampling = {SamplingScheme{SamplingScheme::Kind::power, 2.0}};  // t_i = sqrt(i/n)
    Rng rng(43);
    const ObservationSet obs = draw(c, rng);
    const BinGrid grid = BinGrid::unit(25);
    const NoiseLevelEstimate est = estimate_local_noise_levels(obs, grid);
    const double eta2 = estimate_noise_variance(obs[0]);
    const double h = grid.width();
    for (int k = 3; k <= 25; ++k) {
      // spacing 1/(n F'(s)) = 1/(2 n s) averaged over the bin
      const double profile = std::log(grid.right(k) / grid.left(k)) / (2.0 * h);
      CHECK(est.levels[k - 1](0) / (eta2 / 30000.0) == doctest::Approx(profile).epsilon(0.15));
    }
  }

  TEST_CASE("empty bins borrow a neighbour") {
    ComponentObservations c;
    for (int i = 0; i <= 30; ++i) {
      c.times.push_back(i * 0.01);
      c.values.push_back(std::sin(i));
    }
    c.times.push_back(1.0);
    c.values.push_back(0.0);
    ObservationSet obs;
    obs.components.push_back(c);
    const NoiseLevelEstimate est = estimate_local_noise_levels(obs, BinGrid::unit(10));
    CHECK(est.borrowed.size() == 6);
    for (const auto& l : est.levels) CHECK(l(0) > 0.0);
    CHECK(est.levels[4](0) == est.levels[3](0));
  }

  TEST_CASE("one-dimensional pilot agrees with the scalar pilot") {
    std::mt19937_64 rng(44);
    const std::size_t n = 30000;
    const ObservationSet obs = noisy_bm(n, 1.0, 0.01, rng);
    const BinGrid grid = BinGrid::regular(n, 25);
    const FrequencyRange f = FrequencyRange::for_grid(grid, n);
    const SpectralArray s = spectral_statistics(obs, grid, f, EvaluationPoint::grid_point);
    const Eigen::VectorXd eta2 = Eigen::VectorXd::Constant(1, 1e-4);
    const auto md = pilot_covolatility_raw(s, empirical_noise_terms(s, eta2), 100, 7);
    const auto sc = pilot_spot_volatility_raw(s, 100, 7, 1e-4);
    for (int k = 0; k < 25; ++k) CHECK(md[k](0, 0) == doctest::Approx(sc[k]).epsilon(1e-10));

    // continuous noise norm: same up to the difference between the two norms
    const SpectralArray m = multivariate_statistics(obs, MdOptions{});
    const NoiseLevelEstimate lv = estimate_local_noise_levels(obs, m.grid());
    std::vector<Eigen::VectorXd> levels(25, Eigen::VectorXd::Constant(1, 1e-4 / n));
    const auto cont = pilot_covolatility_raw(m, continuous_noise_terms(levels, m.grid(), m.freq()), 100, 7);
    for (int k = 0; k < 25; ++k) CHECK(cont[k](0, 0) == doctest::Approx(sc[k]).epsilon(0.02));
    CHECK(lv.levels.size() == 25);
  }

  TEST_CASE("pilot covolatility in Monte Carlo mean") {
    Rng rng(45);
    const int reps = 40;
    Eigen::MatrixXd off = Eigen::MatrixXd::Zero(2, 2), clean = Eigen::MatrixXd::Zero(2, 2);
    const ScenarioConfig zero = bivariate(30000, 0.0, 0.01);
    ScenarioConfig noise_free = bivariate(30000, 0.5, 0.0);
    for (int r = 0; r < reps; ++r) {
      const MdPreparation a = prepare_multivariate(draw(zero, rng));
      for (const auto& m : a.local.sigma) off += m / (reps * 25.0);
      const MdPreparation b = prepare_multivariate(draw(noise_free, rng));
      for (const auto& m : b.local.sigma) clean += m / (reps * 25.0);
    }
    CHECK(std::abs(off(0, 1)) < 0.05);
    CHECK(off(0, 0) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(max_abs(clean - noise_free.volatility.covolatility) < 0.05);
  }

  TEST_CASE("PSD projection") {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 2.0, 2.0, 1.0;
    const Eigen::MatrixXd p = project_psd(a);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).eigenvalues().minCoeff() > 0.0);
    CHECK(max_abs(p - p.transpose()) == 0.0);
    const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(3, 3);
    CHECK(max_abs(project_psd(e) - e) < 1e-14);
  }

  TEST_CASE("bivariate Fisher information") {
    const BinGrid grid = BinGrid::unit(25);
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.3, 0.3, 2.0;
    CHECK(bivariate_fisher_info(s, Eigen::Vector2d::Zero(), 0, 1, 7, grid) ==
          doctest::Approx(1.0 / (2.0 + 0.09)));
    CHECK(bivariate_fisher_info(s, Eigen::Vector2d::Zero(), 0, 1, 70, grid) ==
          doctest::Approx(1.0 / (2.0 + 0.09)));
    const double h = 1e-4 / 30000;
    const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(2, 2);
    for (int j : {1, 10, 100}) {
      const double norm = continuous_weight_norm(j, grid);
      CHECK(bivariate_fisher_info(e, Eigen::Vector2d(h, h), 0, 1, j, grid) ==
            doctest::Approx(std::pow(1.0 + h * norm, -2)).epsilon(1e-12));
    }
    double prev = 1e300;
    for (int j = 1; j < 300; ++j) {
      const double v = bivariate_fisher_info(s, Eigen::Vector2d(h, 2 * h), 0, 1, j, grid);
      CHECK(v < prev);
      prev = v;
    }
    CHECK_THROWS_AS(bivariate_fisher_info(s, 0.0, 0.0, 0, 2), ArgumentError);
  }

  TEST_CASE("diagonal entry equals the scalar estimator on identical components") {
    std::mt19937_64 rng(46);
    const std::size_t n = 30000;
    ObservationSet obs = noisy_bm(n, 1.0, 0.01, rng);
    obs.components.push_back(obs.components[0]);
    ObservationSet single;
    single.components.push_back(obs.components[0]);
    const BinGrid grid = BinGrid::regular(n, 25);
    const FrequencyRange f = FrequencyRange::for_grid(grid, n);
    const SpectralArray s2 = spectral_statistics(obs, grid, f, EvaluationPoint::grid_point);
    const SpectralArray s1 = spectral_statistics(single, grid, f, EvaluationPoint::grid_point);
    const WeightTable1D w = optimal_weights_1d(std::vector<double>(25, 1.0), 1e-4, n, grid, f);
    const Eigen::VectorXd eta2 = Eigen::VectorXd::Constant(2, 1e-4);
    const EstimateReport icv = spectral_icv(s2, 0, 0, w, empirical_noise_terms(s2, eta2));
    const EstimateReport iv = spectral_iv(s1, w, 1e-4);
    CHECK(std::abs(icv.final_estimate() - iv.final_estimate()) < 1e-10);
    const EstimateReport cross = spectral_icv(s2, 0, 1, w, empirical_noise_terms(s2, eta2));
    CHECK(cross.final_estimate() > iv.final_estimate());
  }

  TEST_CASE("gain-aware weights reduce to the plain weights on a regular grid") {
    std::mt19937_64 rng(47);
    const std::size_t n = 5000;
    ObservationSet obs = noisy_bm(n, 1.0, 0.01, rng);
    obs.components.push_back(noisy_bm(n, 1.0, 0.01, rng).components[0]);
    const SpectralArray s = multivariate_statistics(obs, MdOptions{10});
    const NoiseTerms nt = empirical_noise_terms(s, Eigen::Vector2d(1e-4, 2e-4));
    Eigen::MatrixXd sig(2, 2);
    sig << 1.0, 0.4, 0.4, 1.5;
    const std::vector<Eigen::MatrixXd> sigma(10, sig);
    const WeightTable1D plain = bivariate_weights(sigma, nt, 0, 1);
    const WeightTable1D gls = bivariate_weights(sigma, s, nt, 0, 1);
    for (int k = 1; k <= 10; k += 3)
      for (int j = 1; j <= s.j_max(); j += 13) {
        CHECK(gls.weight(k, j) == doctest::Approx(plain.weight(k, j)).epsilon(1e-12));
        CHECK(gls.info(k, j) == doctest::Approx(plain.info(k, j)).epsilon(1e-12));
      }
  }

  TEST_CASE("cross estimator under zero correlation") {
    Rng rng(48);
    const ScenarioConfig c = bivariate(30000, 0.0, 0.01);
    std::vector<double> est, stud;
    for (int r = 0; r < 150; ++r) {
      const ObservationSet obs = draw(c, rng);
      const EstimateReport rep = estimate_icv(obs, 0, 1);
      est.push_back(rep.final_estimate());
      stud.push_back(rep.final_estimate() / std::sqrt(rep.final_variance()));
    }
    CHECK(std::abs(mean(est)) < 3 * sample_sd(est) / std::sqrt(150.0));
    CHECK(sample_sd(stud) > 0.8);
    CHECK(sample_sd(stud) < 1.2);
  }

  TEST_CASE("LMM weight matrices") {
    const std::size_t n = 5000;
    const BinGrid grid = BinGrid::regular(n, 10);
    const FrequencyRange f = FrequencyRange::for_grid(grid, n);
    Eigen::MatrixXd sig(2, 2);
    sig << 1.0, 0.5, 0.5, 2.0;
    const std::vector<Eigen::MatrixXd> sigma(10, sig);
    const LmmWeightTable t = lmm_weight_matrices(sigma, discrete_noise(grid, f, n, Eigen::Vector2d(1e-4, 4e-4)));
    for (int k = 0; k < 10; k += 4) {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 4);
      for (const auto& w : t.weights[k]) sum += w;
      CHECK(max_abs(sum - Eigen::MatrixXd::Identity(4, 4)) < 1e-10);
      // I_jk = I_k W_jk decreases in the Loewner order
      for (int j = 0; j + 1 < f.j_max; j += 7) {
        const Eigen::MatrixXd d = t.total_info[k] * (t.weights[k][j] - t.weights[k][j + 1]);
        const Eigen::MatrixXd sym = 0.5 * (d + d.transpose());
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff() >=
              -1e-10 * max_abs(t.total_info[k]));
      }
    }
    CHECK(t.regularized == 0);

    const LmmWeightTable flat = lmm_weight_matrices(sigma, discrete_noise(grid, f, n, Eigen::Vector2d::Zero()));
    for (int j = 0; j < f.j_max; j += 50)
      CHECK(max_abs(flat.weights[3][j] - Eigen::MatrixXd::Identity(4, 4) / f.j_max) < 1e-12);

    const std::vector<Eigen::MatrixXd> scalar(10, Eigen::MatrixXd::Constant(1, 1, 0.7));
    const LmmWeightTable one = lmm_weight_matrices(scalar, discrete_noise(grid, f, n, Eigen::VectorXd::Constant(1, 1e-4)));
    const WeightTable1D w = optimal_weights_1d(std::vector<double>(10, 0.7), 1e-4, n, grid, f);
    for (int j = 1; j <= f.j_max; j += 11) CHECK(std::abs(one.weights[2][j - 1](0, 0) - w.weight(3, j)) < 1e-10);

    const std::vector<Eigen::MatrixXd> zero(10, Eigen::MatrixXd::Zero(2, 2));
    const LmmWeightTable reg = lmm_weight_matrices(zero, discrete_noise(grid, f, n, Eigen::Vector2d::Zero()));
    CHECK(reg.regularized == static_cast<std::size_t>(10 * f.j_max));
  }

  TEST_CASE("LMM estimate is symmetric on non-synchronous data") {
    Rng rng(49);
    ScenarioConfig c = bivariate(5000, 0.5, 0.01, true);
    c.n_per_component = {5000, 3000};
    const LmmReport r = estimate_lmm(draw(c, rng));
    const Eigen::MatrixXd m = r.final_matrix();
    CHECK(max_abs(m - m.transpose()) < 1e-10);
    CHECK(r.final_covariance().rows() == 4);
    CHECK(r.entry_variance(0, 1) > 0.0);
    CHECK(m(0, 1) == doctest::Approx(0.5).epsilon(0.6));
  }

  TEST_CASE("one-dimensional LMM matches the scalar adaptive estimator") {
    std::mt19937_64 rng(50);
    double worst = 0.0;
    for (int r = 0; r < 5; ++r) {
      const ObservationSet obs = noisy_bm(30000, 1.0, 0.01, rng);
      const double lmm = estimate_lmm(obs).final_estimate()(0);
      const double iv = estimate_iv_adaptive(obs).final_estimate();
      worst = std::max(worst, std::abs(lmm / iv - 1.0));
    }
    CHECK(worst < 0.005);
  }

  TEST_CASE("noise estimation error in the multivariate variances") {
    std::mt19937_64 rng(52);
    MdOptions off;
    off.noise_uncertainty = false;
    for (int r = 0; r < 3; ++r) {
      const ObservationSet obs = noisy_bm(30000, 1.0, 0.01, rng);
      const LmmReport l = estimate_lmm(obs);
      const double iv = estimate_iv_adaptive(obs).final_variance();
      CHECK(l.entry_variance(0, 0) == doctest::Approx(iv).epsilon(0.05));
      const EstimateReport a = estimate_icv(obs, 0, 0), b = estimate_icv(obs, 0, 0, off);
      CHECK(a.final_estimate() == b.final_estimate());
      CHECK(a.final_variance() == doctest::Approx(l.entry_variance(0, 0)).epsilon(0.05));
      CHECK(a.final_variance() > b.final_variance());
    }
    const MdPreparation prep = prepare_multivariate(draw(bivariate(3000, 0.3, 0.01, true), rng), off);
    for (int k = 1; k <= prep.sensitivity.n_bins(); ++k) CHECK(prep.sensitivity.at(k, 1).isZero());
    const LmmReport l = estimate_lmm(prep, off);
    const MdPreparation full = prepare_multivariate(draw(bivariate(3000, 0.3, 0.01, true), rng));
    const LmmReport m = estimate_lmm(full);
    CHECK(max_abs(m.final_covariance() - m.final_covariance().transpose()) < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.final_covariance()).eigenvalues().minCoeff() > 0.0);
    CHECK(l.covariance.size() == m.covariance.size());
  }

  TEST_CASE("oracle estimators on Poisson sampling are unbiased for the covolatility") {
    Rng rng(51);
    const ScenarioConfig c = bivariate(10000, 0.5, 0.01, true);
    const std::vector<Eigen::MatrixXd> sigma(default_bin_count(10000), c.volatility.covolatility);
    const Eigen::VectorXd eta2 = Eigen::VectorXd::Constant(2, 1e-4);
    std::vector<double> icv, lmm;
    for (int r = 0; r < 40; ++r) {
      const ObservationSet obs = draw(c, rng);
      const SpectralArray s = multivariate_statistics(obs);
      icv.push_back(estimate_icv_oracle(s, 0, 1, sigma, eta2).final_estimate());
      lmm.push_back(estimate_lmm_oracle(s, sigma, eta2).final_matrix()(0, 1));
    }
    CHECK(std::abs(mean(icv) - 0.5) < 3 * sample_sd(icv) / std::sqrt(40.0));
    CHECK(std::abs(mean(lmm) - 0.5) < 3 * sample_sd(lmm) / std::sqrt(40.0));
  }

  TEST_CASE("previous-tick synchronisation") {
    ObservationSet obs;
    obs.components.push_back(ComponentObservations{{0.0, 0.5, 1.0}, {1.0, 2.0, 3.0}});
    obs.components.push_back(ComponentObservations{{0.0, 0.2, 0.6, 0.7, 1.0}, {5.0, 6.0, 7.0, 8.0, 9.0}});
    const ObservationSet s = synchronize_previous_tick(obs);
    CHECK(s[1].times == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(s[1].values == std::vector<double>{5.0, 6.0, 9.0});
    CHECK(s[0].values == obs[0].values);
  }

  TEST_CASE("invalid arguments") {
    std::mt19937_64 rng(52);
    ObservationSet obs = noisy_bm(1000, 1.0, 0.01, rng);
    obs.components.push_back(obs.components[0]);
    CHECK_THROWS_AS(estimate_icv(obs, 0, 2), ArgumentError);
    const SpectralArray s = multivariate_statistics(obs, MdOptions{5});
    CHECK_THROWS_AS(pilot_covolatility_raw(s, NoiseTerms(4, s.j_max(), 2), 10, 1), ArgumentError);
    CHECK_THROWS_AS(lmm_weight_matrices(std::vector<Eigen::MatrixXd>(3, Eigen::MatrixXd::Identity(2, 2)),
                                        empirical_noise_terms(s, Eigen::Vector2d(1e-4, 1e-4))),
                    ArgumentError);
  }
}
