#include "pcgap/linalg.hpp"

#include <cmath>
#include <string>

#include "pcgap/error.hpp"

namespace pcgap {

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> checked_eigen(
    const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "matrix must be square");
  }
  const double scale = m.norm();
  if ((m - m.transpose()).norm() > 1e-12 * (1.0 + scale)) {
    throw Error(ErrorCode::kNotPSD, "matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(m));
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPSD, "eigendecomposition failed");
  }
  const double min_ev = eig.eigenvalues().minCoeff();
  if (min_ev < -1e-8 * scale) {
    throw Error(ErrorCode::kNotPSD,
                "eigenvalue " + std::to_string(min_ev) + " is negative");
  }
  return eig;
}

}  // namespace

Eigen::MatrixXd sym_psd_sqrt(const Eigen::MatrixXd& m) {
  const auto eig = checked_eigen(m);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return symmetrized(v * root.asDiagonal() * v.transpose());
}

Eigen::MatrixXd sym_pd_inv_sqrt(const Eigen::MatrixXd& m) {
  const auto eig = checked_eigen(m);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (ev.minCoeff() <= 0.0) {
    throw Error(ErrorCode::kNotPSD, "matrix is singular");
  }
  const Eigen::VectorXd inv_root = ev.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return symmetrized(v * inv_root.asDiagonal() * v.transpose());
}

}  // namespace pcgap
