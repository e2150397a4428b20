#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace pcgap {

/// Stable linear-Gaussian dynamics x_{t+1} = A x_t + xi_t, xi_t ~ N(0, Q), with
/// one system coordinate followed by N environment modes:
///
///   A = [ a_s  c^T ]      Q = [ q_s  0      ]
///       [ 0    A_e ]          [ 0    q_e I_N ]
///
/// with A_e diagonal. The two-dimensional case is N = 1.
///
/// Construction only checks shapes and finiteness; stability and noise
/// positivity are checked by the operations that need them (`validate()`).
class DynamicsSpec {
 public:
  DynamicsSpec(double a_s, std::vector<double> a_e_modes,
               std::vector<double> coupling, double q_s, double q_e);

  static DynamicsSpec two_dim(double a_s, double a_e, double c, double q_s,
                              double q_e);

  int n_env() const { return static_cast<int>(a_e_modes_.size()); }
  int dim() const { return n_env() + 1; }

  double a_s() const { return a_s_; }
  const std::vector<double>& a_e_modes() const { return a_e_modes_; }
  const std::vector<double>& coupling() const { return coupling_; }
  double q_s() const { return q_s_; }
  double q_e() const { return q_e_; }
  /// Noise asymmetry q_s / q_e.
  double epsilon() const { return q_s_ / q_e_; }

  /// 2D accessors; only meaningful when n_env() == 1.
  double a_e() const { return a_e_modes_.front(); }
  double c() const { return coupling_.front(); }

  Eigen::MatrixXd transition() const;
  Eigen::MatrixXd noise_cov() const;

  /// Set when the spec came from the NN-sweep grid, whose stricter filter
  /// |c| < 1 - max(|a_s|, |a_e|) it passed.
  bool sweep_filter_passed() const { return sweep_filter_passed_; }
  void mark_sweep_filter_passed() { sweep_filter_passed_ = true; }

  /// Throws StabilityViolation when rho(A) >= 1, InvalidNoise when a noise
  /// variance is not positive.
  void validate() const;

  friend bool operator==(const DynamicsSpec&, const DynamicsSpec&) = default;

 private:
  double a_s_;
  std::vector<double> a_e_modes_;
  std::vector<double> coupling_;
  double q_s_;
  double q_e_;
  bool sweep_filter_passed_ = false;
};

void to_json(nlohmann::json& j, const DynamicsSpec& spec);
/// Accepts the general form {n_env, a_s, a_e_modes, coupling, q_s, q_e} and
/// the compact 2D form {a_s, a_e, c, q_s, q_e}.
void from_json(const nlohmann::json& j, DynamicsSpec& spec);
DynamicsSpec spec_from_json(const nlohmann::json& j);

/// Max |diagonal entry| of A; exact because A is block upper triangular with
/// diagonal A_e.
double spectral_radius(const DynamicsSpec& spec);

enum class CovarianceMethod { kClosedForm2d, kFixedPoint, kDirectVec, kSchur };

struct CovarianceSolution {
  Eigen::MatrixXd sigma;
  double residual_norm = 0.0;
  CovarianceMethod method = CovarianceMethod::kDirectVec;
};

/// Frobenius norm of sigma - A sigma A^T - Q.
double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                         const Eigen::MatrixXd& sigma);

/// Closed-form stationary covariance of the 2D upper-triangular system.
CovarianceSolution solve_covariance_closed_form(const DynamicsSpec& spec);

/// Stationary covariance for any stable spec.
CovarianceSolution solve_covariance_general(const DynamicsSpec& spec);

/// Discrete Lyapunov solve sigma = A sigma A^T + Q for an arbitrary stable A.
///
/// Small systems (n <= kDirectVecMaxDim) use the Kronecker-vectorized linear
/// system; larger ones use a complex Schur reduction (Bartels-Stewart style).
/// If the residual check fails the fixed-point iteration is used instead.
CovarianceSolution solve_lyapunov(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& q);

inline constexpr int kDirectVecMaxDim = 16;

/// Fixed-point iteration sigma_{k+1} = A sigma_k A^T + Q; throws
/// ConvergenceFailure past `max_iterations`.
CovarianceSolution solve_lyapunov_fixed_point(const Eigen::MatrixXd& a,
                                              const Eigen::MatrixXd& q,
                                              double tolerance = 1e-13,
                                              int max_iterations = 100000);

/// Block spec with N environment modes uniformly spaced over [0.3, 0.98]
/// (both endpoints included) and coupling row c / sqrt(N) * (1, ..., 1).
DynamicsSpec build_highdim_spec(int n_env, double a_s, double q_s, double c,
                                double q_e);

enum class StepSemantics { kDiscreteMap, kEuler };

struct TrajectoryBatch {
  /// One dim x length matrix per trajectory; column t is x_t.
  std::vector<Eigen::MatrixXd> states;
  std::uint64_t seed = 0;
  StepSemantics dt_semantics = StepSemantics::kDiscreteMap;

  int count() const { return static_cast<int>(states.size()); }
  int length() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()); }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().rows()); }
};

/// Trajectories started from the stationary law N(0, Sigma).
TrajectoryBatch sample_trajectories(const DynamicsSpec& spec, int count,
                                    int length, std::uint64_t seed);

}  // namespace pcgap
