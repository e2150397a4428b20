#include "pcgap/encoder_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcgap/error.hpp"
#include "pcgap/parallel.hpp"
#include "pcgap/rng.hpp"

namespace pcgap {

namespace {

constexpr double kPolishThreshold = 1e-6;

struct LocalResult {
  Eigen::VectorXd w;
  double value = std::numeric_limits<double>::infinity();
  double projected_gradient = std::numeric_limits<double>::infinity();
  bool converged = false;
};

Eigen::VectorXd tangent(const Eigen::VectorXd& w, const Eigen::VectorXd& g) {
  return g - w * w.dot(g);
}

/// Riemannian Newton steps from a point where first-order descent stalled
/// short of the tolerance. The Hessian is a central difference of the
/// analytic gradient. Only used where the tangent Hessian is positive
/// semidefinite, so saddles are never approached.
void polish(const RiskLandscape& landscape, RiskVariant variant, double beta, Eigen::VectorXd& w,
            double& f, Eigen::VectorXd& pg, double& pg_norm, const SphereOptions& opt) {
  const Eigen::Index n = w.size();
  constexpr double h = 1e-6;
  for (int it = 0; it < 20 && pg_norm >= opt.gradient_tolerance; ++it) {
    const Eigen::VectorXd g = landscape.gradient(w, variant, beta);
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd probe = w;
    for (Eigen::Index i = 0; i < n; ++i) {
      probe(i) = w(i) + h;
      const Eigen::VectorXd up = landscape.gradient(probe, variant, beta);
      probe(i) = w(i) - h;
      hess.col(i) = (up - landscape.gradient(probe, variant, beta)) / (2.0 * h);
      probe(i) = w(i);
    }
    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(n, n) - w * w.transpose();
    Eigen::MatrixXd riem = proj * (0.5 * (hess + hess.transpose())) * proj - w.dot(g) * proj;
    riem = 0.5 * (riem + riem.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(riem);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    // Skip the normal direction w, which the projection maps to 0.
    Eigen::VectorXd coef = eig.eigenvectors().transpose() * pg;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double along_w = std::abs(eig.eigenvectors().col(k).dot(w));
      if (along_w > 0.5 || std::abs(lam(k)) <= 1e-10 * scale) {
        coef(k) = 0.0;
      } else if (lam(k) < 0.0) {
        return;
      } else {
        coef(k) /= lam(k);
      }
    }
    const Eigen::VectorXd w_new = (w - eig.eigenvectors() * coef).normalized();
    const double f_new = landscape.value(w_new, variant, beta);
    Eigen::VectorXd pg_new = tangent(w_new, landscape.gradient(w_new, variant, beta));
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    if (!(f_new <= f + slack && pg_new.norm() < pg_norm)) return;
    w = w_new;
    f = f_new;
    pg = std::move(pg_new);
    pg_norm = pg.norm();
  }
}

LocalResult descend(const RiskLandscape& landscape, RiskVariant variant, double beta,
                    Eigen::VectorXd w, const SphereOptions& opt) {
  w.normalize();
  double f = landscape.value(w, variant, beta);
  Eigen::VectorXd pg = tangent(w, landscape.gradient(w, variant, beta));
  double pg_norm = pg.norm();
  double step = 1.0;
  Eigen::VectorXd w_prev, pg_prev;

  // First-order phase hands over to Newton polishing once close; if the
  // polish is refused it resumes towards the full tolerance.
  double handover = std::max(opt.gradient_tolerance, kPolishThreshold);
  for (int it = 0; it < opt.max_iterations && pg_norm >= opt.gradient_tolerance; ++it) {
    if (pg_norm < handover) {
      polish(landscape, variant, beta, w, f, pg, pg_norm, opt);
      handover = opt.gradient_tolerance;
      if (pg_norm < opt.gradient_tolerance) break;
    }
    // Barzilai-Borwein trial step; the Armijo loop below keeps descent monotone.
    if (it > 0) {
      const Eigen::VectorXd s = w - w_prev;
      const Eigen::VectorXd y = pg - pg_prev;
      const double sy = s.dot(y);
      if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, 1e-12, 1e12);
    }
    const double required = opt.armijo_slope * pg_norm * pg_norm;
    const double trial = step;
    Eigen::VectorXd w_new;
    double f_new = f;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      w_new = (w - step * pg).normalized();
      f_new = landscape.value(w_new, variant, beta);
      if (f_new <= f - step * required) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    Eigen::VectorXd pg_new;
    if (accepted) {
      pg_new = tangent(w_new, landscape.gradient(w_new, variant, beta));
    } else {
      // Near a minimum the sufficient decrease drops below the resolution of
      // f. Keep the BB step if f stays flat to rounding and the projected
      // gradient shrinks.
      step = trial;
      w_new = (w - step * pg).normalized();
      f_new = landscape.value(w_new, variant, beta);
      pg_new = tangent(w_new, landscape.gradient(w_new, variant, beta));
      const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
      if (!(f_new <= f + slack && pg_new.norm() < pg_norm)) break;
    }
    w_prev = w;
    pg_prev = pg;
    w = std::move(w_new);
    f = f_new;
    pg = std::move(pg_new);
    pg_norm = pg.norm();
  }
  if (pg_norm >= opt.gradient_tolerance) polish(landscape, variant, beta, w, f, pg, pg_norm, opt);
  return {w, f, pg_norm, pg_norm < opt.gradient_tolerance};
}

Eigen::VectorXd random_direction(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  } while (v.norm() == 0.0);
  return v.normalized();
}

}  // namespace

double risk_gradient_check(const RiskLandscape& landscape, const Eigen::VectorXd& w,
                           RiskVariant variant, double beta, double h) {
  const Eigen::VectorXd g = landscape.gradient(w, variant, beta);
  Eigen::VectorXd fd(w.size());
  Eigen::VectorXd probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    probe(i) = w(i) + h;
    const double up = landscape.value(probe, variant, beta);
    probe(i) = w(i) - h;
    const double down = landscape.value(probe, variant, beta);
    probe(i) = w(i);
    fd(i) = (up - down) / (2.0 * h);
  }
  return (fd - g).norm() / std::max(g.norm(), 1e-300);
}

EncoderSolution minimize_sphere(const RiskLandscape& landscape, RiskVariant variant,
                                double beta, const SphereOptions& options) {
  if (options.restarts < 1) throw Error(ErrorCode::kInvalidArgument, "restarts must be >= 1");
  if (variant == RiskVariant::kIb && beta < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
  }
  const int dim = landscape.dim();
  // Start 0 is the system axis; starts 1..restarts are random.
  const std::size_t starts = static_cast<std::size_t>(options.restarts) + 1;
  std::vector<LocalResult> results(starts);
  parallel_for(starts, options.threads, [&](std::size_t i) {
    Eigen::VectorXd w0;
    if (i == 0) {
      w0 = Eigen::VectorXd::Zero(dim);
      w0(0) = 1.0;
    } else {
      Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(i)}));
      w0 = random_direction(rng, dim);
    }
    results[i] = descend(landscape, variant, beta, std::move(w0), options);
  });

  int converged = 0;
  const LocalResult* best = nullptr;
  for (const auto& r : results) {
    if (!r.converged) continue;
    ++converged;
    if (best == nullptr || r.value < best->value) best = &r;
  }
  if (best == nullptr) {
    throw Error(ErrorCode::kNoConvergence,
                "no restart reached the stationarity tolerance " +
                    std::to_string(options.gradient_tolerance));
  }

  Encoder enc = Encoder::from_direction(best->w).canonical();
  if (dim == 2) enc = Encoder::from_angle(std::atan2(enc.w()(1), enc.w()(0)));
  EncoderSolution sol{enc, landscape.evaluate(enc.w(), variant, beta), 0, 0.0, 0.0, 0.0, 0.0,
                      std::nullopt};
  sol.restarts_used = static_cast<int>(starts);
  sol.converged_fraction = static_cast<double>(converged) / static_cast<double>(starts);
  sol.fidelity = enc.fidelity();
  sol.projected_gradient_norm =
      tangent(enc.w(), landscape.gradient(enc.w(), variant, beta)).norm();
  sol.gradient_check_error = risk_gradient_check(landscape, enc.w(), variant, beta);
  if (dim == 2) {
    const RiskProfile profile = angular_profile(landscape, variant, beta);
    sol.profile_excess = sol.risk.value - profile.refined_value;
  }
  return sol;
}

EncoderSolution minimize_sphere(const DynamicsSpec& spec, const CovarianceSolution& cov,
                                RiskVariant variant, double beta,
                                const SphereOptions& options) {
  return minimize_sphere(RiskLandscape(spec, cov), variant, beta, options);
}

BayesSolution bayes_optimal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma) {
  const Eigen::MatrixXd root = sym_psd_sqrt(sigma);
  const Eigen::MatrixXd inv_root = sym_pd_inv_sqrt(sigma);
  const Eigen::MatrixXd m = symmetrized(root * a.transpose() * a * root);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPSD, "eigendecomposition of M failed");
  }
  const Eigen::Index n = m.rows();
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const double lambda = ev(n - 1);
  const Eigen::VectorXd u = eig.eigenvectors().col(n - 1);

  BayesSolution sol{Encoder::from_direction(inv_root * u).canonical()};
  sol.leading_eigenvalue = lambda;
  const double scale = std::max({std::abs(lambda), m.norm(), 1e-300});
  sol.eigen_residual = (m * u - lambda * u).norm() / scale;
  sol.m_matrix_condition = ev(0) > 0.0 ? lambda / ev(0)
                                       : std::numeric_limits<double>::infinity();
  sol.degenerate_spectrum = n >= 2 && (lambda - ev(n - 2)) <= 1e-10 * std::abs(lambda);
  return sol;
}

BayesSolution bayes_optimal(const DynamicsSpec& spec, const CovarianceSolution& cov) {
  return bayes_optimal(spec.transition(), cov.sigma);
}

void to_json(nlohmann::json& j, const EncoderSolution& sol) {
  const auto& w = sol.encoder.w();
  j = nlohmann::json{
      {"w", std::vector<double>(w.data(), w.data() + w.size())},
      {"theta_deg", nullptr},
      {"risk", sol.risk.value},
      {"alpha_star", sol.risk.alpha_star},
      {"fidelity", sol.fidelity},
      {"restarts_used", sol.restarts_used},
  };
  if (sol.encoder.theta()) {
    j["theta_deg"] = *sol.encoder.theta() * 180.0 / std::numbers::pi;
  }
}

}  // namespace pcgap
