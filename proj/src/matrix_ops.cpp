#include "specvol/matrix_ops.hpp"

#include <cmath>
#include <string>

#include "specvol/errors.hpp"

namespace specvol {

Eigen::VectorXd vec(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ArgumentError("vec: matrix must be square");
  return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) throw ArgumentError("unvec: length is not a square");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), d, d);
}

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index p = 0; p < a.rows(); ++p)
    for (Eigen::Index pp = 0; pp < a.cols(); ++pp)
      out.block(p * b.rows(), pp * b.cols(), b.rows(), b.cols()) = a(p, pp) * b;
  return out;
}

Eigen::MatrixXd commutation_matrix(int d) {
  if (d < 1) throw ArgumentError("commutation matrix needs d >= 1");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d * d, d * d);
  // vec(A)[p + d q] = A(p, q); vec(A^T)[q + d p] = A(p, q)
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) c(q + d * p, p + d * q) = 1.0;
  return c;
}

Eigen::MatrixXd symmetrizer_z(int d) {
  return Eigen::MatrixXd::Identity(d * d, d * d) + commutation_matrix(d);
}

Eigen::MatrixXd symmetric_matrix_power(const Eigen::MatrixXd& a, double power) {
  if (a.rows() != a.cols()) throw ArgumentError("matrix power: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ArgumentError("matrix power: matrix must be symmetric");
  const bool supported = power == 1.0 || power == 0.5 || power == 0.25 || power == -1.0 ||
                         power == -0.5;
  if (!supported) throw ArgumentError("matrix power: unsupported exponent");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -1e-10 * scale)
      throw NumericDomainError("matrix power: matrix is not positive semidefinite");
    if (lambda(i) < 0.0) lambda(i) = 0.0;
    if (power < 0.0 && lambda(i) < 1e-12)
      throw NumericDomainError("matrix power: singular matrix for a negative exponent");
    lambda(i) = std::pow(lambda(i), power);
  }
  Eigen::MatrixXd out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd noise_scaled_root(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& h_diag) {
  if (h_diag.size() != sigma.rows()) throw ArgumentError("noise scale dimension mismatch");
  if ((h_diag.array() <= 0.0).any()) throw NumericDomainError("noise scales must be positive");
  const Eigen::VectorXd inv = h_diag.cwiseInverse();
  const Eigen::MatrixXd inner = inv.asDiagonal() * sigma * inv.asDiagonal();
  return h_diag.asDiagonal() * symmetric_matrix_power(inner, 0.5) * h_diag.asDiagonal();
}

MatrixOpsContext::MatrixOpsContext(int d)
    : d_(d), commutation_(commutation_matrix(d)), z_(symmetrizer_z(d)) {}

}  // namespace specvol
