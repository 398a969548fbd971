#include "linalg.hpp"

#include <stdexcept>
#include <string>

#include "wbc/transport.hpp"

namespace wbc {

Matrix matrix_sqrt_psd(const Matrix& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("matrix_sqrt_psd: matrix is not square");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw std::invalid_argument("matrix_sqrt_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(detail::symmetrized(S));
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("matrix_sqrt_psd: eigendecomposition did not converge");
  }
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix& V = eig.eigenvectors();
  return detail::symmetrized(V * root.asDiagonal() * V.transpose());
}

namespace detail {

Matrix inverse_sqrt_pd(const Matrix& S, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(S));
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("inverse_sqrt_pd: eigendecomposition did not converge");
  }
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo > floor)) {
    throw std::domain_error("matrix is singular (smallest eigenvalue " + std::to_string(lo) + ")");
  }
  const Vector inv_root = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  const Matrix& V = eig.eigenvectors();
  return symmetrized(V * inv_root.asDiagonal() * V.transpose());
}

double bures_squared(const Matrix& S1, const Matrix& S2) {
  const Matrix A = matrix_sqrt_psd(S1);
  const Matrix B = matrix_sqrt_psd(S2);
  Eigen::JacobiSVD<Matrix> svd(B.transpose() * A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix U = svd.matrixU() * svd.matrixV().transpose();
  return (A - B * U).squaredNorm();
}

}  // namespace detail
}  // namespace wbc
