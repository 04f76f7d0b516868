#pragma once

// vec / Kronecker / commutation-matrix algebra for d x d covolatility
// matrices and their d^2-dimensional vectorisations.

#include <Eigen/Dense>

namespace specvol {

/// Column-stacking vec(A). Throws ArgumentError for non-square input.
Eigen::VectorXd vec(const Eigen::MatrixXd& a);
/// Inverse of vec for a vector of length d^2.
Eigen::MatrixXd unvec(const Eigen::VectorXd& v);

/// (A (x) B)_{d(p-1)+q, d(p'-1)+q'} = A_pp' B_qq'.
Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// C_{d,d} with C vec(A) = vec(A^T).
Eigen::MatrixXd commutation_matrix(int d);
/// Z = E_{d^2} + C_{d,d} = Cov(vec(Z Z^T)) for Z ~ N(0, E_d).
Eigen::MatrixXd symmetrizer_z(int d);

/// A^power for symmetric positive semidefinite A via eigendecomposition,
/// power in {1, 1/2, 1/4, -1, -1/2}. Eigenvalues in [-1e-10, 0) are
/// clipped to 0; negative powers need eigenvalues >= 1e-12.
Eigen::MatrixXd symmetric_matrix_power(const Eigen::MatrixXd& a, double power);

/// (Sigma^H)^{1/2} = H (H^{-1} Sigma H^{-1})^{1/2} H for diagonal H > 0.
Eigen::MatrixXd noise_scaled_root(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& h_diag);

/// Cached commutation and Z matrices for one dimension.
class MatrixOpsContext {
 public:
  explicit MatrixOpsContext(int d);
  int dimension() const { return d_; }
  const Eigen::MatrixXd& commutation() const { return commutation_; }
  const Eigen::MatrixXd& z() const { return z_; }

 private:
  int d_;
  Eigen::MatrixXd commutation_;
  Eigen::MatrixXd z_;
};

}  // namespace specvol
