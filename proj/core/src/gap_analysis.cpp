#include "pcgap/gap_analysis.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcgap/error.hpp"
#include "pcgap/parallel.hpp"
#include "pcgap/rng.hpp"

namespace pcgap {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Ties (exactly decoupled, equal-noise dynamics) evaluate to rounding noise.
constexpr double kTieTolerance = 1e-12;

}  // namespace

bool ParamPoint::in_domain() const {
  return std::abs(a_s) < 1.0 && std::abs(a_e) < 1.0 && q_s > 0.0 && q_e > 0.0 &&
         std::isfinite(c);
}

DynamicsSpec ParamPoint::to_spec() const { return DynamicsSpec::two_dim(a_s, a_e, c, q_s, q_e); }

ParamPoint ParamPoint::from_array(const std::array<double, 5>& eta) {
  return {eta[0], eta[1], eta[2], eta[3], eta[4]};
}

double delta_gap(const ParamPoint& p) {
  const CovarianceSolution cov = solve_covariance_closed_form(p.to_spec());
  const double s11 = cov.sigma(0, 0);
  const double s12 = cov.sigma(0, 1);
  const double lag = p.a_s * s11 + p.c * s12;
  return s11 * s11 - lag * lag - p.q_e * s11;
}

VerificationReport verify_counterexample(const ParamPoint& p, int n_points) {
  const DynamicsSpec spec = p.to_spec();
  VerificationReport rep;
  rep.sigma = solve_covariance_closed_form(spec);
  const RiskLandscape landscape(spec, rep.sigma);
  rep.r_nz = landscape.value(Encoder::system_axis(2).w(), RiskVariant::kLatent);
  rep.r_env = landscape.value(Encoder::environment_axis().w(), RiskVariant::kLatent);
  const RiskProfile profile = angular_profile(landscape, RiskVariant::kLatent, 0.0, n_points);

  const double s11 = rep.sigma.sigma(0, 0);
  const double lag = p.a_s * s11 + p.c * rep.sigma.sigma(0, 1);
  rep.delta = s11 * s11 - lag * lag - p.q_e * s11;
  rep.ratio = rep.r_nz / rep.r_env;
  rep.nz_suboptimal = rep.delta > kTieTolerance * s11 * s11;

  if (rep.r_nz <= profile.refined_value + kTieTolerance * std::abs(rep.r_nz)) {
    rep.r_star = rep.r_nz;
    rep.theta_star_rad = 0.0;
  } else {
    rep.r_star = profile.refined_value;
    rep.theta_star_rad = profile.refined_theta;
  }
  rep.theta_star_deg = axis_deviation_deg(rep.theta_star_rad);
  const double edge = std::min(rep.r_nz, rep.r_env);
  rep.interior_optimum = rep.r_star < edge - kTieTolerance * edge &&
                         rep.theta_star_deg > 0.0 && rep.theta_star_deg < 90.0;
  return rep;
}

RobustnessResult measure_robustness(const ParamPoint& center, double radius, int n_samples,
                                    std::uint64_t seed) {
  if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "radius must be > 0");
  if (n_samples < 1) throw Error(ErrorCode::kInvalidArgument, "n_samples must be >= 1");
  if (!center.in_domain()) throw Error(ErrorCode::kInvalidArgument, "center outside the domain");
  Rng rng(seed);
  RobustnessResult out;
  int positive = 0;
  const auto c = center.as_array();
  while (out.accepted < n_samples) {
    std::array<double, 5> eta{};
    for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = rng.uniform(c[i] - radius, c[i] + radius);
    const ParamPoint p = ParamPoint::from_array(eta);
    if (!p.in_domain()) {
      ++out.rejected;
      if (out.rejected > 1000 * n_samples) {
        throw Error(ErrorCode::kInvalidArgument, "ball lies mostly outside the stable domain");
      }
      continue;
    }
    ++out.accepted;
    if (delta_gap(p) > 0.0) ++positive;
  }
  out.fraction = static_cast<double>(positive) / out.accepted;
  return out;
}

double boundary_curvature(const ParamPoint& p, double h) {
  const DynamicsSpec spec = p.to_spec();
  const RiskLandscape landscape(spec, solve_covariance_closed_form(spec));
  const double r0 = landscape.angular_value(0.0, RiskVariant::kLatent);
  const double rp = landscape.angular_value(h, RiskVariant::kLatent);
  const double rm = landscape.angular_value(-h, RiskVariant::kLatent);
  return (rp - 2.0 * r0 + rm) / (h * h);
}

BifurcationResult find_bifurcation(const ParamPoint& base, double c_lo, double c_hi, int grid) {
  if (grid < 16) throw Error(ErrorCode::kInvalidArgument, "bifurcation grid must be >= 16");
  if (!(c_lo < c_hi)) throw Error(ErrorCode::kInvalidArgument, "need c_lo < c_hi");
  auto at = [&](double c) {
    ParamPoint p = base;
    p.c = c;
    return p;
  };
  BifurcationResult out;
  for (int k = 0; k < grid; ++k) {
    const double c = k == grid - 1 ? c_hi : c_lo + (c_hi - c_lo) * k / (grid - 1);
    const ParamPoint p = at(c);
    out.second_derivative_at_zero.emplace_back(c, boundary_curvature(p));
    out.theta_star_path.emplace_back(c, verify_counterexample(p).theta_star_deg);
  }
  const auto& d2 = out.second_derivative_at_zero;
  std::size_t k = 0;
  while (k + 1 < d2.size() && std::signbit(d2[k].second) == std::signbit(d2[k + 1].second)) ++k;
  if (k + 1 == d2.size()) {
    throw Error(ErrorCode::kNoSignChange,
                "boundary curvature keeps one sign on [" + std::to_string(c_lo) + ", " +
                    std::to_string(c_hi) + "]");
  }
  double lo = d2[k].first, hi = d2[k + 1].first;
  const bool lo_negative = std::signbit(d2[k].second);
  while (hi - lo >= 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (std::signbit(boundary_curvature(at(mid))) == lo_negative) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.bracket = {lo, hi};
  out.c_star = 0.5 * (lo + hi);
  return out;
}

std::vector<IbPoint> ib_sweep(const ParamPoint& p, const std::vector<double>& betas) {
  const DynamicsSpec spec = p.to_spec();
  const RiskLandscape landscape(spec, solve_covariance_closed_form(spec));
  std::vector<IbPoint> out;
  out.reserve(betas.size());
  for (double beta : betas) {
    if (beta < 0.0) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
    const RiskProfile profile = angular_profile(landscape, RiskVariant::kIb, beta);
    const double on_axis = landscape.value(Encoder::system_axis(2).w(), RiskVariant::kIb, beta);
    if (on_axis <= profile.refined_value + kTieTolerance * std::abs(on_axis)) {
      out.push_back({beta, 0.0, on_axis, beta == 0.0});
    } else {
      out.push_back({beta, axis_deviation_deg(profile.refined_theta), profile.refined_value,
                     beta == 0.0});
    }
  }
  return out;
}

double compression_direction_deg(const ParamPoint& p) {
  const CovarianceSolution cov = solve_covariance_closed_form(p.to_spec());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.sigma);
  const Eigen::VectorXd v = eig.eigenvectors().col(0);
  return axis_deviation_deg(std::atan2(v(1), v(0)));
}

std::string_view to_string(GridBlock b) {
  switch (b) {
    case GridBlock::kDiagonal: return "diagonal";
    case GridBlock::kNegativeCoupling: return "negative";
    case GridBlock::kPositiveCoupling: return "positive";
  }
  return "diagonal";
}

std::vector<GridConfig> linear_grid_configs() {
  constexpr double kQs = 0.05, kQe = 0.10;
  std::vector<GridConfig> out;
  out.reserve(160);
  for (double a_s : {0.05, 0.3, 0.5, 0.7, 0.9}) {
    for (double a_e : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99}) {
      out.push_back({{a_s, 0.0, a_e, kQs, kQe}, GridBlock::kDiagonal});
    }
  }
  auto coupled = [&](std::initializer_list<double> cs, GridBlock block) {
    for (double c : cs) {
      for (double a_s : {0.05, 0.3, 0.5, 0.9}) {
        for (double a_e : {0.3, 0.7, 0.9, 0.95, 0.98}) {
          out.push_back({{a_s, c, a_e, kQs, kQe}, block});
        }
      }
    }
  };
  coupled({-0.9, -0.6, -0.3}, GridBlock::kNegativeCoupling);
  coupled({0.3, 0.6, 0.9}, GridBlock::kPositiveCoupling);
  return out;
}

GridSweepResult linear_grid_sweep(const std::vector<GridConfig>& configs, int threads) {
  GridSweepResult out;
  out.rows.resize(configs.size());
  parallel_for(configs.size(), threads, [&](std::size_t i) {
    GridRow& row = out.rows[i];
    row.config = configs[i];
    row.report = verify_counterexample(configs[i].params);
    row.nz_optimal = row.report.theta_star_rad == 0.0;
    row.fidelity = row.nz_optimal ? 1.0 : std::abs(std::cos(row.report.theta_star_rad));
  });
  out.n_configs = static_cast<int>(out.rows.size());
  for (const auto& r : out.rows) out.n_nz_optimal += r.nz_optimal ? 1 : 0;
  out.frac_suboptimal =
      out.n_configs == 0 ? 0.0
                         : static_cast<double>(out.n_configs - out.n_nz_optimal) / out.n_configs;
  return out;
}

GridSweepResult linear_grid_sweep(int threads) {
  return linear_grid_sweep(linear_grid_configs(), threads);
}

std::string grid_to_csv(const GridSweepResult& result) {
  std::ostringstream out;
  out.precision(12);
  out << "a_s,a_e,c,q_s,q_e,r_nz,r_env,r_star,theta_star_deg,fidelity,nz_optimal\n";
  for (const auto& r : result.rows) {
    const ParamPoint& p = r.config.params;
    out << p.a_s << ',' << p.a_e << ',' << p.c << ',' << p.q_s << ',' << p.q_e << ','
        << r.report.r_nz << ',' << r.report.r_env << ',' << r.report.r_star << ','
        << r.report.theta_star_deg << ',' << r.fidelity << ',' << (r.nz_optimal ? 1 : 0)
        << '\n';
  }
  return out.str();
}

nlohmann::json grid_summary_json(const GridSweepResult& result) {
  return {{"n_configs", result.n_configs},
          {"n_nz_optimal", result.n_nz_optimal},
          {"frac_suboptimal", result.frac_suboptimal}};
}

}  // namespace pcgap
