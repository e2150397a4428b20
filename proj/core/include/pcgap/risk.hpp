#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pcgap/lingauss.hpp"

namespace pcgap {

/// Unit-norm linear encoder y = w^T x. In 2D it may carry the angle theta
/// with w = (cos theta, sin theta).
class Encoder {
 public:
  /// `w` must have unit norm to 1e-12.
  explicit Encoder(Eigen::VectorXd w);

  /// Normalizes `v`; throws InvalidArgument for a zero vector.
  static Encoder from_direction(const Eigen::VectorXd& v);
  /// 2D encoder at angle theta, reduced to [0, pi).
  static Encoder from_angle(double theta);
  /// (1, 0, ..., 0): reads only the system coordinate.
  static Encoder system_axis(int dim);
  /// 2D pure-environment encoder (0, 1).
  static Encoder environment_axis();

  const Eigen::VectorXd& w() const { return w_; }
  const std::optional<double>& theta() const { return theta_; }
  int dim() const { return static_cast<int>(w_.size()); }

  /// Same direction with the first nonzero coordinate made positive.
  Encoder canonical() const;

  /// |w_s| / (|w_s| + ||w_e||).
  double fidelity() const;

 private:
  Eigen::VectorXd w_;
  std::optional<double> theta_;
};

enum class RiskVariant { kLatent, kSystem, kIb };

std::string_view to_string(RiskVariant v);
RiskVariant risk_variant_from_string(std::string_view s);

struct RiskEvaluation {
  double value = 0.0;
  double alpha_star = 0.0;
  RiskVariant variant = RiskVariant::kLatent;
  std::optional<double> beta;
};

/// Precomputed quadratic forms of one (spec, Sigma) pair. Every risk
/// functional is a ratio of quadratics in w:
///
///   latent  R     = v - u^2 / v,       v = w^T Sigma w, u = w^T A Sigma w
///   system  R_sys = Sigma_00 - (h^T w)^2 / v,   h = Sigma A^T e_0
///   IB      R + beta * log v
///
/// `value` and `gradient` treat w as a free vector in R^n (no normalization),
/// which is what the sphere optimizer and the finite-difference checks use.
class RiskLandscape {
 public:
  RiskLandscape(const DynamicsSpec& spec, const CovarianceSolution& cov);
  RiskLandscape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma);

  int dim() const { return static_cast<int>(sigma_.rows()); }
  const Eigen::MatrixXd& sigma() const { return sigma_; }

  RiskEvaluation evaluate(const Eigen::VectorXd& w, RiskVariant variant,
                          double beta = 0.0) const;
  double value(const Eigen::VectorXd& w, RiskVariant variant, double beta = 0.0) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& w, RiskVariant variant,
                           double beta = 0.0) const;

  /// Risk along w(theta) = (cos theta, sin theta); 2D only.
  double angular_value(double theta, RiskVariant variant, double beta = 0.0) const;

 private:
  double variance(const Eigen::VectorXd& w) const;

  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd cross_;  // symmetric part of A Sigma
  Eigen::VectorXd target_;  // Sigma A^T e_0
};

/// Guard threshold on w^T Sigma w below which DegenerateVariance is thrown.
inline constexpr double kMinLatentVariance = 1e-14;

RiskEvaluation latent_risk(const Encoder& enc, const DynamicsSpec& spec,
                           const CovarianceSolution& cov);
RiskEvaluation system_risk(const Encoder& enc, const DynamicsSpec& spec,
                           const CovarianceSolution& cov);
RiskEvaluation ib_objective(const Encoder& enc, const DynamicsSpec& spec,
                            const CovarianceSolution& cov, double beta);

struct RiskProfile {
  std::vector<double> thetas;
  std::vector<double> values;
  /// Grid minimizer.
  double argmin_theta = 0.0;
  double argmin_value = 0.0;
  /// Golden-section refinement of the grid minimizer, reduced to [0, pi).
  double refined_theta = 0.0;
  double refined_value = 0.0;
};

inline constexpr int kDefaultProfilePoints = 4001;

/// Scans n_points equally spaced angles k*pi/n_points over [0, pi), then
/// refines the best bracket by golden-section search to width < 1e-8 rad.
RiskProfile angular_profile(const DynamicsSpec& spec, const CovarianceSolution& cov,
                            RiskVariant variant, double beta = 0.0,
                            int n_points = kDefaultProfilePoints);
RiskProfile angular_profile(const RiskLandscape& landscape, RiskVariant variant,
                            double beta = 0.0, int n_points = kDefaultProfilePoints);

/// Unsigned deviation of a 2D direction from the system axis, in degrees,
/// folded to [0, 90] (encoders are sign-invariant).
double axis_deviation_deg(double theta);

/// Two-column CSV (theta_rad, risk) preceded by a `# spec: {...}` line.
std::string profile_to_csv(const RiskProfile& profile, const DynamicsSpec& spec);

}  // namespace pcgap
