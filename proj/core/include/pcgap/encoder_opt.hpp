#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "pcgap/linalg.hpp"
#include "pcgap/lingauss.hpp"
#include "pcgap/risk.hpp"

namespace pcgap {

struct SphereOptions {
  int restarts = 500;
  std::uint64_t seed = 0;
  /// Stationarity target on ||(I - w w^T) grad R(w)||.
  double gradient_tolerance = 1e-9;
  int max_iterations = 20000;
  /// Armijo slope and shrink factor of the backtracking line search.
  double armijo_slope = 1e-4;
  double shrink = 0.5;
  /// Worker threads used for restarts; 0 picks the hardware concurrency.
  int threads = 0;
};

struct EncoderSolution {
  Encoder encoder;
  RiskEvaluation risk;
  int restarts_used = 0;
  /// Fraction of restarts that reached the stationarity tolerance.
  double converged_fraction = 0.0;
  double fidelity = 0.0;
  /// ||(I - w w^T) grad R|| at the returned encoder.
  double projected_gradient_norm = 0.0;
  /// Relative error of the analytic gradient against central differences at
  /// the returned encoder.
  double gradient_check_error = 0.0;
  /// 2D only: returned risk minus the refined angular-profile minimum.
  std::optional<double> profile_excess;
};

/// Minimizes a risk functional over the unit sphere by projected gradient
/// descent with Armijo backtracking, renormalizing after every step. Runs
/// `restarts` starts drawn uniformly on the sphere, plus one start at the
/// system axis, and returns the best stationary point.
///
/// Each restart draws from its own stream derived from (seed, restart index),
/// so the result does not depend on thread scheduling.
EncoderSolution minimize_sphere(const RiskLandscape& landscape, RiskVariant variant,
                                double beta, const SphereOptions& options);
EncoderSolution minimize_sphere(const DynamicsSpec& spec, const CovarianceSolution& cov,
                                RiskVariant variant, double beta,
                                const SphereOptions& options);

/// Relative error ||g_fd - g|| / max(||g||, 1e-300) of the analytic risk
/// gradient against central differences with step h.
double risk_gradient_check(const RiskLandscape& landscape, const Eigen::VectorXd& w,
                           RiskVariant variant, double beta, double h = 1e-6);

struct BayesSolution {
  Encoder encoder;
  double leading_eigenvalue = 0.0;
  double m_matrix_condition = 0.0;
  /// ||M u - lambda u|| / |lambda| at the returned pair.
  double eigen_residual = 0.0;
  /// Set when the top two eigenvalues of M agree to 1e-10 relatively.
  bool degenerate_spectrum = false;
};

/// Best one-dimensional linear encoder for predicting the full next state:
/// leading eigenvector u of M = Sigma^{1/2} A^T A Sigma^{1/2}, mapped back by
/// w = Sigma^{-1/2} u and normalized with the first nonzero coordinate
/// positive.
BayesSolution bayes_optimal(const DynamicsSpec& spec, const CovarianceSolution& cov);
BayesSolution bayes_optimal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma);

/// {w, theta_deg, risk, alpha_star, fidelity, restarts_used}
void to_json(nlohmann::json& j, const EncoderSolution& sol);

}  // namespace pcgap
