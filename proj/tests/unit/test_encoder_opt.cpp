#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "error_code.hpp"
#include "oracles.hpp"
#include "pcgap/encoder_opt.hpp"

using namespace pcgap;

namespace {

const DynamicsSpec kReference = DynamicsSpec::two_dim(0.05, 0.98, -0.90, 0.05, 0.10);

SphereOptions options(int restarts, std::uint64_t seed = 0, int threads = 1) {
  SphereOptions o;
  o.restarts = restarts;
  o.seed = seed;
  o.threads = threads;
  return o;
}

}  // namespace

TEST(SymPsdSqrt, Examples) {
  EXPECT_TRUE(sym_psd_sqrt(Eigen::Matrix3d::Identity()).isApprox(Eigen::Matrix3d::Identity()));
  const Eigen::MatrixXd s = sym_psd_sqrt(Eigen::Vector2d(4, 9).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(s(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(s(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-14);

  const auto cov = solve_covariance_closed_form(kReference);
  const Eigen::MatrixXd root = sym_psd_sqrt(cov.sigma);
  EXPECT_LT((root * root - cov.sigma).norm(), 1e-10);

  Eigen::Matrix2d bad;
  bad << 1, 0, 0, -1;
  EXPECT_EQ(oracle::code_of([&] { sym_psd_sqrt(bad); }), ErrorCode::kNotPSD);
}

TEST(MinimizeSphere, ReferenceOptimum) {
  const auto cov = solve_covariance_closed_form(kReference);
  const auto sol = minimize_sphere(kReference, cov, RiskVariant::kLatent, 0.0, options(50));
  EXPECT_NEAR(sol.risk.value, 0.074, 1e-3);
  const double theta = std::atan2(sol.encoder.w()(1), sol.encoder.w()(0));
  EXPECT_NEAR(axis_deviation_deg(theta), 43.7, 0.1);
  EXPECT_LT(sol.projected_gradient_norm, 1e-9);
  EXPECT_LT(sol.gradient_check_error, 1e-5);
  ASSERT_TRUE(sol.profile_excess.has_value());
  EXPECT_LT(std::abs(*sol.profile_excess), 1e-10);
  EXPECT_GT(sol.encoder.w()(0), 0.0);
  EXPECT_LE(sol.risk.value, latent_risk(Encoder::system_axis(2), kReference, cov).value);
}

TEST(MinimizeSphere, DiagonalSpecPicksSystemAxis) {
  const auto spec = DynamicsSpec::two_dim(0.7, 0.3, 0.0, 0.05, 0.10);
  const auto cov = solve_covariance_closed_form(spec);
  const auto sol = minimize_sphere(spec, cov, RiskVariant::kLatent, 0.0, options(20));
  EXPECT_NEAR(sol.fidelity, 1.0, 1e-9);
  const auto prof = angular_profile(spec, cov, RiskVariant::kLatent);
  EXPECT_NEAR(axis_deviation_deg(prof.argmin_theta), 0.0, 1e-12);
}

TEST(MinimizeSphere, RestartRobustnessOnRandomFamily) {
  Rng rng(31, 0);
  int recovered = 0;
  constexpr int kSpecs = 1000;
  for (int k = 0; k < kSpecs; ++k) {
    const auto spec = oracle::random_stable_2d(rng);
    const auto cov = solve_covariance_closed_form(spec);
    const auto sol =
        minimize_sphere(spec, cov, RiskVariant::kLatent, 0.0, options(20, static_cast<unsigned>(k)));
    const auto prof = angular_profile(spec, cov, RiskVariant::kLatent);
    recovered += std::abs(sol.risk.value - prof.refined_value) < 1e-7;
    EXPECT_LT(sol.projected_gradient_norm, 1e-9);
  }
  EXPECT_EQ(recovered, kSpecs);
}

TEST(MinimizeSphere, NeverWorseThanSystemAxisInHighDim) {
  for (double c : {-0.95, -0.5, 0.1, 0.95}) {
    const auto spec = build_highdim_spec(10, 0.05, 0.05, c, 0.10);
    const auto cov = solve_covariance_general(spec);
    const auto sol = minimize_sphere(spec, cov, RiskVariant::kLatent, 0.0, options(20));
    const double r_nz = latent_risk(Encoder::system_axis(11), spec, cov).value;
    EXPECT_LT(sol.risk.value, r_nz) << "c=" << c;
    EXPECT_LT(sol.projected_gradient_norm, 1e-9);
  }
}

TEST(MinimizeSphere, ScheduleIndependent) {
  const auto spec = build_highdim_spec(10, 0.05, 0.01, -0.5, 0.10);
  const auto cov = solve_covariance_general(spec);
  const auto one = minimize_sphere(spec, cov, RiskVariant::kLatent, 0.0, options(16, 3, 1));
  const auto four = minimize_sphere(spec, cov, RiskVariant::kLatent, 0.0, options(16, 3, 4));
  EXPECT_EQ(one.encoder.w(), four.encoder.w());
  EXPECT_EQ(one.risk.value, four.risk.value);
}

TEST(RiskGradientCheck, SmallAtRandomPoints) {
  const auto spec = build_highdim_spec(4, 0.1, 0.05, 0.3, 0.1);
  const RiskLandscape land(spec, solve_covariance_general(spec));
  Rng rng(4, 0);
  Eigen::VectorXd w(5);
  for (int i = 0; i < 5; ++i) w(i) = rng.normal();
  w.normalize();
  EXPECT_LT(risk_gradient_check(land, w, RiskVariant::kLatent, 0.0), 1e-6);
  EXPECT_LT(risk_gradient_check(land, w, RiskVariant::kIb, 0.1), 1e-6);
}

TEST(BayesOptimal, ReferenceIsNotSystemAxis) {
  const auto cov = solve_covariance_closed_form(kReference);
  const auto b = bayes_optimal(kReference, cov);
  EXPECT_GT(std::abs(b.encoder.w()(1)), std::abs(b.encoder.w()(0)));
  EXPECT_LT(latent_risk(b.encoder, kReference, cov).value, 0.174);
  EXPECT_LT(b.eigen_residual, 1e-10);
  EXPECT_FALSE(b.degenerate_spectrum);
}

TEST(BayesOptimal, IsotropicIsDegenerate) {
  const Eigen::MatrixXd a = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  const auto b = bayes_optimal(a, sigma);
  EXPECT_TRUE(b.degenerate_spectrum);
  EXPECT_NEAR(b.encoder.w().norm(), 1.0, 1e-12);
}

TEST(BayesOptimal, DiagonalPicksLargestSignalAxis) {
  // a_i^2 Sigma_ii: 0.81 * 1 vs 0.25 * 2 -> first axis; 0.81 * 1 vs 0.25 * 4 -> second.
  Eigen::MatrixXd a = Eigen::Vector2d(0.9, 0.5).asDiagonal();
  Eigen::MatrixXd s1 = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  Eigen::MatrixXd s2 = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  EXPECT_NEAR(std::abs(bayes_optimal(a, s1).encoder.w()(0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(bayes_optimal(a, s2).encoder.w()(1)), 1.0, 1e-12);
}

TEST(EncoderSolution, JsonFields) {
  const auto cov = solve_covariance_closed_form(kReference);
  const auto sol = minimize_sphere(kReference, cov, RiskVariant::kLatent, 0.0, options(4));
  const nlohmann::json j = sol;
  for (const char* key : {"w", "theta_deg", "risk", "alpha_star", "fidelity", "restarts_used"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["theta_deg"].is_number());
}
