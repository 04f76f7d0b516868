#pragma once

// Asymptotic variance targets of the spectral estimators and the
// noise-free realized covariance baseline.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "specvol/observations.hpp"
#include "specvol/simulator.hpp"

namespace specvol {

/// Integrated asymptotic variance (1x1) or covariance (d^2 x d^2) at t.
struct AsymptoticTarget {
  Eigen::MatrixXd value;
  std::vector<double> times;      ///< fine-grid points up to t
  std::vector<double> integrand;  ///< scalar integrand (trace for matrices)
  std::string rule = "trapezoid";
  bool reference_only = false;    ///< set for the unreconciled closed form

  double scalar() const { return value(0, 0); }
};

/// Trapezoidal integral of f(s_i) over [0, t] with a partial last interval.
double integrate_trapezoid(const std::vector<double>& times, const std::vector<double>& values,
                           double t);

/// integral_0^t 8 eta |sigma_s|^3 ds for component p of the path.
AsymptoticTarget avar_iv(const VolatilityPath& vol, double eta, double t, int p = 0);
/// Constant volatility: 8 eta |sigma|^3 t.
double avar_iv(double sigma, double eta, double t);

/// Closed form v_s^2 of the bivariate estimator,
///   2 (q_p q_q nu_p nu_q (A^2 - B) B)^{1/2}
///     (sqrt(A + sqrt(A^2 - B)) - sgn(A^2 - B) sqrt(A - sqrt(A^2 - B))),
/// q_l = (F_l^{-1})'(s), A = S_pp q_q nu_q/(q_p nu_p) + S_qq q_p nu_p/(q_q nu_q),
/// B = 4 (S_pp S_qq + S_pq^2), evaluated with principal complex roots and
/// sgn(0) = -1. Kept for reference: it carries no noise scaling and vanishes
/// whenever A^2 = B.
double icv_closed_form_a(const Eigen::MatrixXd& sigma, int p, int q, double qp, double qq,
                         double nu_p, double nu_q);
double icv_closed_form_b(const Eigen::MatrixXd& sigma, int p, int q);
/// Throws NumericDomainError when the value is not a nonnegative real.
double icv_closed_form_integrand(const Eigen::MatrixXd& sigma, int p, int q, double qp, double qq,
                                 double nu_p, double nu_q);
AsymptoticTarget avar_icv_closed_form(const VolatilityPath& vol, const SamplingScheme& fp,
                                      const SamplingScheme& fq, double nu_p, double nu_q, int p,
                                      int q, double t);

/// sqrt(n) sum_k h^2 / I_k for the bivariate estimator on regular grids of
/// n_p and n_q observations, with sigma[k] the covolatility on bin k and
/// N_j^(l) = eta_l^2 [phi_j, phi_j]_{n_l} / n_l; n = min(n_p, n_q).
double avar_icv_riemann(const std::vector<Eigen::MatrixXd>& sigma, const Eigen::VectorXd& eta,
                        std::size_t n_p, std::size_t n_q, int p, int q);

/// I^{-1} = 2 integral (Sigma (x) (Sigma^H)^{1/2} + (Sigma^H)^{1/2} (x) Sigma) ds with
/// H(s) = diag(eta_l nu_l^{1/2} F_l'(s)^{-1/2}). The CLT covariance of
/// sqrt(n) (LMM - integrated Sigma) is I^{-1} Z.
AsymptoticTarget acov_lmm(const VolatilityPath& vol, const std::vector<double>& eta,
                          const std::vector<double>& nu,
                          const std::vector<SamplingScheme>& schemes, double t);
/// Constant Sigma and H over [0, t].
Eigen::MatrixXd acov_lmm(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& h_diag, double t);

struct RealizedCovariance {
  Eigen::MatrixXd estimate;  ///< sum_i Delta X Delta X^T
  Eigen::MatrixXd avar;      ///< integral (Sigma (x) Sigma) Z ds, covariance of sqrt(n) vec error
};

/// Realized covariance of synchronous noise-free observations with its
/// asymptotic covariance from the volatility path up to the last time.
RealizedCovariance realized_covariance_baseline(const ObservationSet& obs,
                                                const VolatilityPath& vol);

}  // namespace specvol
