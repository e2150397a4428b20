#include "pcgap/lingauss.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "pcgap/error.hpp"
#include "pcgap/linalg.hpp"
#include "pcgap/rng.hpp"

namespace pcgap {

DynamicsSpec::DynamicsSpec(double a_s, std::vector<double> a_e_modes,
                           std::vector<double> coupling, double q_s, double q_e)
    : a_s_(a_s),
      a_e_modes_(std::move(a_e_modes)),
      coupling_(std::move(coupling)),
      q_s_(q_s),
      q_e_(q_e) {
  if (a_e_modes_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one environment mode");
  }
  if (coupling_.size() != a_e_modes_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "coupling length " + std::to_string(coupling_.size()) +
                    " != number of environment modes " +
                    std::to_string(a_e_modes_.size()));
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(a_s_) || !finite(q_s_) || !finite(q_e_) ||
      !std::all_of(a_e_modes_.begin(), a_e_modes_.end(), finite) ||
      !std::all_of(coupling_.begin(), coupling_.end(), finite)) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite dynamics parameter");
  }
}

DynamicsSpec DynamicsSpec::two_dim(double a_s, double a_e, double c, double q_s,
                                   double q_e) {
  return DynamicsSpec(a_s, {a_e}, {c}, q_s, q_e);
}

Eigen::MatrixXd DynamicsSpec::transition() const {
  const int n = dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  a(0, 0) = a_s_;
  for (int i = 0; i < n_env(); ++i) {
    a(0, i + 1) = coupling_[i];
    a(i + 1, i + 1) = a_e_modes_[i];
  }
  return a;
}

Eigen::MatrixXd DynamicsSpec::noise_cov() const {
  Eigen::VectorXd d = Eigen::VectorXd::Constant(dim(), q_e_);
  d(0) = q_s_;
  return d.asDiagonal();
}

void DynamicsSpec::validate() const {
  if (!(q_s_ > 0.0) || !(q_e_ > 0.0)) {
    throw Error(ErrorCode::kInvalidNoise, "noise variances must be positive (q_s=" +
                                              std::to_string(q_s_) + ", q_e=" +
                                              std::to_string(q_e_) + ")");
  }
  const double rho = spectral_radius(*this);
  if (!(rho < 1.0)) {
    throw Error(ErrorCode::kStabilityViolation,
                "spectral radius " + std::to_string(rho) + " >= 1");
  }
}

void to_json(nlohmann::json& j, const DynamicsSpec& spec) {
  j = nlohmann::json{{"n_env", spec.n_env()},
                     {"a_s", spec.a_s()},
                     {"a_e_modes", spec.a_e_modes()},
                     {"coupling", spec.coupling()},
                     {"q_s", spec.q_s()},
                     {"q_e", spec.q_e()}};
}

void from_json(const nlohmann::json& j, DynamicsSpec& spec) {
  spec = spec_from_json(j);
}

DynamicsSpec spec_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("a_e_modes")) {
      DynamicsSpec spec(j.at("a_s").get<double>(),
                        j.at("a_e_modes").get<std::vector<double>>(),
                        j.at("coupling").get<std::vector<double>>(),
                        j.at("q_s").get<double>(), j.at("q_e").get<double>());
      if (j.contains("n_env") && j.at("n_env").get<int>() != spec.n_env()) {
        throw Error(ErrorCode::kInvalidArgument, "n_env disagrees with a_e_modes");
      }
      return spec;
    }
    return DynamicsSpec::two_dim(j.at("a_s").get<double>(), j.at("a_e").get<double>(),
                                 j.at("c").get<double>(), j.at("q_s").get<double>(),
                                 j.at("q_e").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad DynamicsSpec JSON: ") + e.what());
  }
}

double spectral_radius(const DynamicsSpec& spec) {
  double rho = std::abs(spec.a_s());
  for (double a : spec.a_e_modes()) rho = std::max(rho, std::abs(a));
  return rho;
}

double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                         const Eigen::MatrixXd& sigma) {
  return (sigma - a * sigma * a.transpose() - q).norm();
}

namespace {

void check_residual(CovarianceSolution& sol, const Eigen::MatrixXd& a,
                    const Eigen::MatrixXd& q) {
  sol.sigma = symmetrized(sol.sigma);
  sol.residual_norm = lyapunov_residual(a, q, sol.sigma);
}

bool residual_ok(const CovarianceSolution& sol) {
  return sol.residual_norm < 1e-10 * (1.0 + sol.sigma.norm());
}

double matrix_spectral_radius(const Eigen::MatrixXd& a) {
  // Triangular input is common here; skip the eigen solve when possible.
  if (a.isUpperTriangular(0.0)) return a.diagonal().cwiseAbs().maxCoeff();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

CovarianceSolution solve_direct_vec(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  const Eigen::Index n = a.rows();
  // vec(A S A^T) = (A kron A) vec(S) with column-major vec.
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) -= a(i, j) * a;
    }
  }
  const Eigen::VectorXd vq = Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
  const Eigen::VectorXd vs = k.partialPivLu().solve(vq);
  CovarianceSolution sol;
  sol.sigma = Eigen::Map<const Eigen::MatrixXd>(vs.data(), n, n);
  sol.method = CovarianceMethod::kDirectVec;
  return sol;
}

CovarianceSolution solve_schur(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const Eigen::Index n = a.rows();
  // A = U T U^H, so X = U^H Sigma U satisfies X = T X T^H + U^H Q U.
  Eigen::ComplexSchur<Eigen::MatrixXd> schur(a);
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  const CMatrix c = u.adjoint() * q.cast<Complex>() * u;

  CMatrix x = CMatrix::Zero(n, n);
  // Column j: (I - conj(T_jj) T) x_j = c_j + T * sum_{l>j} conj(T_jl) x_l.
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
    for (Eigen::Index l = j + 1; l < n; ++l) acc += std::conj(t(j, l)) * x.col(l);
    Eigen::VectorXcd rhs = c.col(j) + t * acc;
    CMatrix lhs = -std::conj(t(j, j)) * t;
    lhs.diagonal().array() += 1.0;
    x.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  CovarianceSolution sol;
  sol.sigma = (u * x * u.adjoint()).real();
  sol.method = CovarianceMethod::kSchur;
  return sol;
}

}  // namespace

CovarianceSolution solve_covariance_closed_form(const DynamicsSpec& spec) {
  if (spec.n_env() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "closed form requires a 2D spec");
  }
  spec.validate();
  const double as = spec.a_s(), ae = spec.a_e(), c = spec.c();
  const double qs = spec.q_s(), qe = spec.q_e();
  const double s22 = qe / (1.0 - ae * ae);
  const double s12 = c * ae * qe / ((1.0 - ae * ae) * (1.0 - as * ae));
  const double s11 =
      (c * c * qe * (1.0 + as * ae) / ((1.0 - ae * ae) * (1.0 - as * ae)) + qs) /
      (1.0 - as * as);
  CovarianceSolution sol;
  sol.sigma.resize(2, 2);
  sol.sigma << s11, s12, s12, s22;
  sol.method = CovarianceMethod::kClosedForm2d;
  check_residual(sol, spec.transition(), spec.noise_cov());
  return sol;
}

CovarianceSolution solve_lyapunov_fixed_point(const Eigen::MatrixXd& a,
                                              const Eigen::MatrixXd& q,
                                              double tolerance, int max_iterations) {
  Eigen::MatrixXd sigma = q;
  for (int k = 0; k < max_iterations; ++k) {
    Eigen::MatrixXd next = a * sigma * a.transpose() + q;
    const double change = (next - sigma).norm();
    sigma = std::move(next);
    if (change <= tolerance * (1.0 + sigma.norm())) {
      CovarianceSolution sol{sigma, 0.0, CovarianceMethod::kFixedPoint};
      check_residual(sol, a, q);
      return sol;
    }
  }
  throw Error(ErrorCode::kConvergenceFailure,
              "fixed-point Lyapunov iteration exceeded " + std::to_string(max_iterations) +
                  " iterations");
}

CovarianceSolution solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  if (a.rows() != a.cols() || q.rows() != q.cols() || a.rows() != q.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "A and Q must be square and of equal size");
  }
  const double rho = matrix_spectral_radius(a);
  if (!(rho < 1.0)) {
    throw Error(ErrorCode::kStabilityViolation,
                "spectral radius " + std::to_string(rho) + " >= 1");
  }
  CovarianceSolution sol =
      a.rows() <= kDirectVecMaxDim ? solve_direct_vec(a, q) : solve_schur(a, q);
  check_residual(sol, a, q);
  if (residual_ok(sol)) return sol;
  return solve_lyapunov_fixed_point(a, q);
}

CovarianceSolution solve_covariance_general(const DynamicsSpec& spec) {
  spec.validate();
  return solve_lyapunov(spec.transition(), spec.noise_cov());
}

DynamicsSpec build_highdim_spec(int n_env, double a_s, double q_s, double c, double q_e) {
  if (n_env < 1) throw Error(ErrorCode::kInvalidArgument, "N must be >= 1");
  std::vector<double> modes(n_env);
  if (n_env == 1) {
    // A single mode sits at the slow end of the range.
    modes[0] = 0.98;
  } else {
    for (int i = 0; i < n_env; ++i) modes[i] = 0.3 + (0.98 - 0.3) * i / (n_env - 1);
  }
  const std::vector<double> coupling(n_env, c / std::sqrt(static_cast<double>(n_env)));
  DynamicsSpec spec(a_s, std::move(modes), coupling, q_s, q_e);
  if (!(spectral_radius(spec) < 1.0)) {
    throw Error(ErrorCode::kStabilityViolation, "high-dimensional spec is unstable");
  }
  return spec;
}

TrajectoryBatch sample_trajectories(const DynamicsSpec& spec, int count, int length,
                                    std::uint64_t seed) {
  if (count < 1 || length < 1) {
    throw Error(ErrorCode::kInvalidArgument, "count and length must be >= 1");
  }
  const CovarianceSolution cov = solve_covariance_general(spec);
  const Eigen::MatrixXd root = sym_psd_sqrt(cov.sigma);
  const Eigen::MatrixXd a = spec.transition();
  const Eigen::VectorXd noise_sd = spec.noise_cov().diagonal().cwiseSqrt();
  const int n = spec.dim();

  TrajectoryBatch batch;
  batch.seed = seed;
  batch.dt_semantics = StepSemantics::kDiscreteMap;
  batch.states.reserve(count);
  Eigen::VectorXd z(n);
  for (int k = 0; k < count; ++k) {
    Rng rng(seed, static_cast<std::uint64_t>(k));
    Eigen::MatrixXd traj(n, length);
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    traj.col(0) = root * z;
    for (int t = 1; t < length; ++t) {
      for (int i = 0; i < n; ++i) z(i) = rng.normal();
      traj.col(t) = a * traj.col(t - 1) + noise_sd.cwiseProduct(z);
    }
    batch.states.push_back(std::move(traj));
  }
  return batch;
}

}  // namespace pcgap
