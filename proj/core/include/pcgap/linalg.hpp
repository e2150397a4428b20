#pragma once

#include <Eigen/Dense>

namespace pcgap {

/// Symmetric square root S of a symmetric PSD matrix (S * S = m), computed by
/// eigendecomposition. Eigenvalues in [-1e-8 ||m||, 0) are clipped to zero;
/// anything more negative raises NotPSD.
Eigen::MatrixXd sym_psd_sqrt(const Eigen::MatrixXd& m);

/// Inverse symmetric square root of a symmetric positive definite matrix.
Eigen::MatrixXd sym_pd_inv_sqrt(const Eigen::MatrixXd& m);

/// (m + m^T) / 2.
inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace pcgap
