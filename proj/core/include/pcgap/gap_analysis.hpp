#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pcgap/lingauss.hpp"
#include "pcgap/risk.hpp"

namespace pcgap {

/// Point eta = (a_s, c, a_e, q_s, q_e) of the 2D upper-triangular family.
struct ParamPoint {
  double a_s = 0.0;
  double c = 0.0;
  double a_e = 0.0;
  double q_s = 0.0;
  double q_e = 0.0;

  /// |a_s| < 1, |a_e| < 1, q_s > 0, q_e > 0.
  bool in_domain() const;
  DynamicsSpec to_spec() const;
  std::array<double, 5> as_array() const { return {a_s, c, a_e, q_s, q_e}; }
  static ParamPoint from_array(const std::array<double, 5>& eta);

  friend bool operator==(const ParamPoint&, const ParamPoint&) = default;
};

/// The reference counterexample (0.05, -0.90, 0.98, 0.05, 0.10).
inline constexpr ParamPoint kReferencePoint{0.05, -0.90, 0.98, 0.05, 0.10};

/// Sigma_11^2 - (a_s Sigma_11 + c Sigma_12)^2 - q_e Sigma_11 from the closed
/// form; positive exactly when the system-axis encoder is worse than the
/// environment-axis encoder.
double delta_gap(const ParamPoint& p);

struct VerificationReport {
  CovarianceSolution sigma;
  double r_nz = 0.0;
  double r_env = 0.0;
  double r_star = 0.0;
  /// Minimizer angle as deviation from the system axis, folded to [0, 90].
  double theta_star_deg = 0.0;
  /// Minimizer angle in [0, pi).
  double theta_star_rad = 0.0;
  double delta = 0.0;
  /// r_nz / r_env.
  double ratio = 0.0;
  bool nz_suboptimal = false;
  bool interior_optimum = false;
};

VerificationReport verify_counterexample(const ParamPoint& p,
                                         int n_points = kDefaultProfilePoints);

struct RobustnessResult {
  double fraction = 0.0;
  int accepted = 0;
  /// Draws that fell outside the stable domain and were redrawn.
  int rejected = 0;
};

/// Fraction of uniform draws from the L-infinity ball of `radius` around
/// `center` with delta_gap > 0.
RobustnessResult measure_robustness(const ParamPoint& center, double radius, int n_samples,
                                    std::uint64_t seed);

/// d^2 R / d theta^2 at theta = 0 by central differences with step h.
double boundary_curvature(const ParamPoint& p, double h = 1e-5);

struct BifurcationResult {
  double c_star = 0.0;
  std::pair<double, double> bracket;
  /// (c, d^2R/dtheta^2 at 0) on the scan grid.
  std::vector<std::pair<double, double>> second_derivative_at_zero;
  /// (c, theta* in degrees from the system axis) on the scan grid.
  std::vector<std::pair<double, double>> theta_star_path;
};

/// Scans c over `grid` evenly spaced points in [c_lo, c_hi] (the c field of
/// `base` is ignored), locates the first sign change of the boundary
/// curvature and bisects it to a bracket narrower than 1e-8. Throws
/// NoSignChange when the curvature keeps one sign.
BifurcationResult find_bifurcation(const ParamPoint& base, double c_lo, double c_hi,
                                   int grid);

struct IbPoint {
  double beta = 0.0;
  double theta_star_deg = 0.0;
  double ib_value = 0.0;
  /// beta == 0, where the compression term vanishes.
  bool singular_boundary = false;
};

inline const std::vector<double> kIbBetaGrid{1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 1.0};

std::vector<IbPoint> ib_sweep(const ParamPoint& p, const std::vector<double>& betas);

/// Direction of least latent variance (smallest eigenvector of Sigma) as a
/// deviation from the system axis in degrees.
double compression_direction_deg(const ParamPoint& p);

enum class GridBlock { kDiagonal, kNegativeCoupling, kPositiveCoupling };
std::string_view to_string(GridBlock b);

struct GridConfig {
  ParamPoint params;
  GridBlock block = GridBlock::kDiagonal;
};

/// The 160-point deterministic grid: 40 diagonal, 60 negative and 60 positive
/// coupling configurations with q_s = 0.05, q_e = 0.10.
std::vector<GridConfig> linear_grid_configs();

struct GridRow {
  GridConfig config;
  VerificationReport report;
  /// |cos theta*|.
  double fidelity = 0.0;
  bool nz_optimal = false;
};

struct GridSweepResult {
  std::vector<GridRow> rows;
  int n_configs = 0;
  int n_nz_optimal = 0;
  double frac_suboptimal = 0.0;
};

GridSweepResult linear_grid_sweep(int threads = 0);
GridSweepResult linear_grid_sweep(const std::vector<GridConfig>& configs, int threads = 0);

/// Columns: a_s,a_e,c,q_s,q_e,r_nz,r_env,r_star,theta_star_deg,fidelity,nz_optimal
std::string grid_to_csv(const GridSweepResult& result);
/// {n_configs, n_nz_optimal, frac_suboptimal}
nlohmann::json grid_summary_json(const GridSweepResult& result);

}  // namespace pcgap
