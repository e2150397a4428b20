#include "pcgap/risk.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcgap/error.hpp"
#include "pcgap/linalg.hpp"

namespace pcgap {

namespace {
constexpr double kPi = std::numbers::pi;

double reduce_angle(double theta) {
  double t = std::fmod(theta, kPi);
  if (t < 0.0) t += kPi;
  if (t >= kPi) t -= kPi;
  return t;
}
}  // namespace

Encoder::Encoder(Eigen::VectorXd w) : w_(std::move(w)) {
  if (w_.size() < 1 || std::abs(w_.norm() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "encoder must have unit norm");
  }
}

Encoder Encoder::from_direction(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "cannot normalize a zero direction");
  }
  return Encoder(v / n);
}

Encoder Encoder::from_angle(double theta) {
  const double t = reduce_angle(theta);
  Eigen::Vector2d w(std::cos(t), std::sin(t));
  Encoder enc(w);
  enc.theta_ = t;
  return enc;
}

Encoder Encoder::system_axis(int dim) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  w(0) = 1.0;
  Encoder enc(w);
  if (dim == 2) enc.theta_ = 0.0;
  return enc;
}

Encoder Encoder::environment_axis() {
  Encoder enc(Eigen::Vector2d(0.0, 1.0));
  enc.theta_ = kPi / 2;
  return enc;
}

Encoder Encoder::canonical() const {
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (w_(i) != 0.0) {
      if (w_(i) > 0.0) return *this;
      Encoder flipped(-w_);
      if (w_.size() == 2) flipped.theta_ = reduce_angle(std::atan2(-w_(1), -w_(0)));
      return flipped;
    }
  }
  return *this;
}

double Encoder::fidelity() const {
  const double ws = std::abs(w_(0));
  const double we = w_.tail(w_.size() - 1).norm();
  return ws / (ws + we);
}

std::string_view to_string(RiskVariant v) {
  switch (v) {
    case RiskVariant::kLatent: return "latent";
    case RiskVariant::kSystem: return "system";
    case RiskVariant::kIb: return "ib";
  }
  return "latent";
}

RiskVariant risk_variant_from_string(std::string_view s) {
  if (s == "latent") return RiskVariant::kLatent;
  if (s == "system") return RiskVariant::kSystem;
  if (s == "ib") return RiskVariant::kIb;
  throw Error(ErrorCode::kInvalidArgument, "unknown risk variant '" + std::string(s) + "'");
}

RiskLandscape::RiskLandscape(const DynamicsSpec& spec, const CovarianceSolution& cov)
    : RiskLandscape(spec.transition(), cov.sigma) {}

RiskLandscape::RiskLandscape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma)
    : sigma_(symmetrized(sigma)) {
  if (a.rows() != sigma.rows() || a.cols() != sigma.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "A and Sigma dimensions differ");
  }
  cross_ = symmetrized(a * sigma_);
  target_ = sigma_ * a.row(0).transpose();
}

double RiskLandscape::variance(const Eigen::VectorXd& w) const {
  if (w.size() != sigma_.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "encoder dimension does not match the spec");
  }
  const double v = w.dot(sigma_ * w);
  if (!(v >= kMinLatentVariance)) {
    throw Error(ErrorCode::kDegenerateVariance, "w^T Sigma w = " + std::to_string(v));
  }
  return v;
}

RiskEvaluation RiskLandscape::evaluate(const Eigen::VectorXd& w, RiskVariant variant,
                                       double beta) const {
  const double v = variance(w);
  RiskEvaluation out;
  out.variant = variant;
  switch (variant) {
    case RiskVariant::kLatent:
    case RiskVariant::kIb: {
      const double u = w.dot(cross_ * w);
      out.alpha_star = u / v;
      out.value = v - u * u / v;
      if (variant == RiskVariant::kIb) {
        if (beta < 0.0) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
        out.beta = beta;
        if (beta != 0.0) out.value += beta * std::log(v);
      }
      break;
    }
    case RiskVariant::kSystem: {
      const double p = target_.dot(w);
      out.alpha_star = p / v;
      out.value = sigma_(0, 0) - p * p / v;
      break;
    }
  }
  return out;
}

double RiskLandscape::value(const Eigen::VectorXd& w, RiskVariant variant, double beta) const {
  return evaluate(w, variant, beta).value;
}

Eigen::VectorXd RiskLandscape::gradient(const Eigen::VectorXd& w, RiskVariant variant,
                                        double beta) const {
  const double v = variance(w);
  const Eigen::VectorXd grad_v = 2.0 * (sigma_ * w);
  switch (variant) {
    case RiskVariant::kLatent:
    case RiskVariant::kIb: {
      const Eigen::VectorXd cw = cross_ * w;
      const double u = w.dot(cw);
      const double r = u / v;
      // d(v - u^2/v) = dv (1 + r^2) - 2 r du,  du = 2 cross w.
      Eigen::VectorXd g = (1.0 + r * r) * grad_v - 4.0 * r * cw;
      if (variant == RiskVariant::kIb && beta != 0.0) g += (beta / v) * grad_v;
      return g;
    }
    case RiskVariant::kSystem: {
      const double p = target_.dot(w);
      const double r = p / v;
      return r * r * grad_v - 2.0 * r * target_;
    }
  }
  return grad_v;
}

double RiskLandscape::angular_value(double theta, RiskVariant variant, double beta) const {
  if (dim() != 2) throw Error(ErrorCode::kInvalidArgument, "angular risk requires 2D");
  const Eigen::Vector2d w(std::cos(theta), std::sin(theta));
  return value(w, variant, beta);
}

RiskEvaluation latent_risk(const Encoder& enc, const DynamicsSpec& spec,
                           const CovarianceSolution& cov) {
  return RiskLandscape(spec, cov).evaluate(enc.w(), RiskVariant::kLatent);
}

RiskEvaluation system_risk(const Encoder& enc, const DynamicsSpec& spec,
                           const CovarianceSolution& cov) {
  return RiskLandscape(spec, cov).evaluate(enc.w(), RiskVariant::kSystem);
}

RiskEvaluation ib_objective(const Encoder& enc, const DynamicsSpec& spec,
                            const CovarianceSolution& cov, double beta) {
  return RiskLandscape(spec, cov).evaluate(enc.w(), RiskVariant::kIb, beta);
}

namespace {

// Golden-section minimization on [lo, hi] until the bracket is below `width`.
std::pair<double, double> golden_section(const auto& f, double lo, double hi, double width) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > width) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace

RiskProfile angular_profile(const RiskLandscape& landscape, RiskVariant variant,
                            double beta, int n_points) {
  if (n_points < 3) throw Error(ErrorCode::kInvalidArgument, "n_points must be >= 3");
  if (landscape.dim() != 2) throw Error(ErrorCode::kInvalidArgument, "angular profile needs N=1");
  RiskProfile p;
  p.thetas.resize(n_points);
  p.values.resize(n_points);
  const double step = kPi / n_points;
  int best = 0;
  for (int k = 0; k < n_points; ++k) {
    p.thetas[k] = k * step;
    p.values[k] = landscape.angular_value(p.thetas[k], variant, beta);
    if (p.values[k] < p.values[best]) best = k;
  }
  p.argmin_theta = p.thetas[best];
  p.argmin_value = p.values[best];

  // R is pi-periodic, so the bracket may straddle 0.
  auto f = [&](double t) { return landscape.angular_value(t, variant, beta); };
  auto [t, v] = golden_section(f, p.argmin_theta - step, p.argmin_theta + step, 1e-8);
  if (v <= p.argmin_value) {
    p.refined_theta = reduce_angle(t);
    p.refined_value = v;
  } else {
    p.refined_theta = p.argmin_theta;
    p.refined_value = p.argmin_value;
  }
  return p;
}

RiskProfile angular_profile(const DynamicsSpec& spec, const CovarianceSolution& cov,
                            RiskVariant variant, double beta, int n_points) {
  if (spec.n_env() != 1) throw Error(ErrorCode::kInvalidArgument, "angular profile needs N=1");
  return angular_profile(RiskLandscape(spec, cov), variant, beta, n_points);
}

double axis_deviation_deg(double theta) {
  const double deg = reduce_angle(theta) * 180.0 / kPi;
  return deg <= 90.0 ? deg : 180.0 - deg;
}

std::string profile_to_csv(const RiskProfile& profile, const DynamicsSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "# spec: " << nlohmann::json(spec).dump() << "\n";
  out << "theta_rad,risk\n";
  for (std::size_t k = 0; k < profile.thetas.size(); ++k) {
    out << profile.thetas[k] << "," << profile.values[k] << "\n";
  }
  return out.str();
}

}  // namespace pcgap
