#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "error_code.hpp"
#include "oracles.hpp"
#include "pcgap/risk.hpp"

using namespace pcgap;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

struct Reference {
  DynamicsSpec spec = DynamicsSpec::two_dim(0.05, 0.98, -0.90, 0.05, 0.10);
  CovarianceSolution cov = solve_covariance_closed_form(spec);
};

}  // namespace

TEST(Encoder, ConstructionAndFidelity) {
  EXPECT_EQ(oracle::code_of([] { Encoder(Eigen::Vector2d(1.0, 0.1)); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(oracle::code_of([] { Encoder::from_direction(Eigen::Vector2d::Zero()); }),
            ErrorCode::kInvalidArgument);
  const auto e = Encoder::from_angle(0.3);
  EXPECT_NEAR(e.w()(0), std::cos(0.3), 1e-12);
  EXPECT_NEAR(e.w()(1), std::sin(0.3), 1e-12);
  EXPECT_DOUBLE_EQ(Encoder::system_axis(5).fidelity(), 1.0);
  EXPECT_DOUBLE_EQ(Encoder::environment_axis().fidelity(), 0.0);
  const auto c = Encoder(Eigen::Vector2d(-0.6, 0.8)).canonical();
  EXPECT_DOUBLE_EQ(c.w()(0), 0.6);
  EXPECT_DOUBLE_EQ(c.w()(1), -0.8);
}

TEST(LatentRisk, ReferenceValues) {
  const Reference r;
  EXPECT_NEAR(latent_risk(Encoder::system_axis(2), r.spec, r.cov).value, 0.174, 1e-3);
  const auto env = latent_risk(Encoder::environment_axis(), r.spec, r.cov);
  EXPECT_NEAR(env.value, 0.100, 1e-12);
  EXPECT_NEAR(env.alpha_star, 0.98, 1e-12);
}

TEST(LatentRisk, DiagonalSystemAxisEqualsSystemNoise) {
  const auto spec = DynamicsSpec::two_dim(0.6, 0.3, 0.0, 0.07, 0.2);
  const auto cov = solve_covariance_closed_form(spec);
  EXPECT_NEAR(latent_risk(Encoder::system_axis(2), spec, cov).value, 0.07, 1e-14);
}

TEST(LatentRisk, Properties) {
  Rng rng(5, 0);
  for (int k = 0; k < 300; ++k) {
    const auto spec = oracle::random_stable_2d(rng);
    const auto cov = solve_covariance_closed_form(spec);
    const RiskLandscape land(spec, cov);
    const Eigen::Vector2d w = Encoder::from_angle(rng.uniform(0, std::numbers::pi)).w();
    const auto ev = land.evaluate(w, RiskVariant::kLatent);
    const double v = w.dot(cov.sigma * w);
    EXPECT_GE(ev.value, 0.0);
    EXPECT_LE(ev.value, v);
    EXPECT_EQ(ev.value, land.value(-w, RiskVariant::kLatent));
    EXPECT_NEAR(ev.value, (1 - ev.alpha_star * ev.alpha_star) * v, 1e-12 * (1 + v));
    EXPECT_GE(land.value(w, RiskVariant::kSystem), 0.0);
  }
}

TEST(SystemRisk, ReferenceValues) {
  const Reference r;
  EXPECT_NEAR(system_risk(Encoder::system_axis(2), r.spec, r.cov).value, 0.174, 1e-3);
  EXPECT_NEAR(system_risk(Encoder::environment_axis(), r.spec, r.cov).value, 0.050, 1e-3);
}

TEST(SystemRisk, DiagonalMonotoneInCosine) {
  const auto spec = DynamicsSpec::two_dim(0.7, 0.5, 0.0, 0.05, 0.1);
  const RiskLandscape land(spec, solve_covariance_closed_form(spec));
  double prev = -1.0;
  for (int k = 0; k <= 90; ++k) {
    const double v = land.angular_value(k / kDeg, RiskVariant::kSystem);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(IbObjective, ZeroBetaIsLatentAndPenaltyIsNaturalLog) {
  const Reference r;
  Rng rng(3, 0);
  for (int k = 0; k < 50; ++k) {
    const auto enc = Encoder::from_angle(rng.uniform(0, std::numbers::pi));
    EXPECT_EQ(ib_objective(enc, r.spec, r.cov, 0.0).value, latent_risk(enc, r.spec, r.cov).value);
  }
  const auto enc = Encoder::from_angle(43.7 / kDeg);
  const double v = enc.w().dot(r.cov.sigma * enc.w());
  EXPECT_NEAR(ib_objective(enc, r.spec, r.cov, 1e-4).value,
              latent_risk(enc, r.spec, r.cov).value + 1e-4 * std::log(v), 1e-15);
  EXPECT_NEAR(latent_risk(enc, r.spec, r.cov).value, 0.074, 1e-3);
}

TEST(RiskLandscape, GradientMatchesFiniteDifferences) {
  const auto spec = build_highdim_spec(6, 0.05, 0.05, -0.5, 0.1);
  const RiskLandscape land(spec, solve_covariance_general(spec));
  Rng rng(8, 0);
  for (auto variant : {RiskVariant::kLatent, RiskVariant::kSystem, RiskVariant::kIb}) {
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd w(7);
      for (int i = 0; i < 7; ++i) w(i) = rng.normal();
      w.normalize();
      const Eigen::VectorXd g = land.gradient(w, variant, 0.01);
      Eigen::VectorXd fd(7);
      for (int i = 0; i < 7; ++i) {
        Eigen::VectorXd wp = w, wm = w;
        wp(i) += 1e-6;
        wm(i) -= 1e-6;
        fd(i) = (land.value(wp, variant, 0.01) - land.value(wm, variant, 0.01)) / 2e-6;
      }
      EXPECT_LT((fd - g).norm() / g.norm(), 1e-6) << to_string(variant);
    }
  }
}

TEST(AngularProfile, ReferenceArgmins) {
  const Reference r;
  const auto lat = angular_profile(r.spec, r.cov, RiskVariant::kLatent);
  EXPECT_NEAR(axis_deviation_deg(lat.argmin_theta), 43.7, 0.05);
  EXPECT_NEAR(lat.argmin_value, 0.074, 1e-3);
  EXPECT_LE(lat.refined_value, lat.argmin_value);
  EXPECT_NEAR(axis_deviation_deg(lat.refined_theta), 43.7, 0.05);

  const auto sys = angular_profile(r.spec, r.cov, RiskVariant::kSystem);
  EXPECT_NEAR(axis_deviation_deg(sys.refined_theta), 86.8, 0.05);
  EXPECT_NEAR(sys.refined_value, 0.050, 1e-3);
}

TEST(AngularProfile, GridShapeAndArgmin) {
  const Reference r;
  const auto p = angular_profile(r.spec, r.cov, RiskVariant::kLatent, 0.0, 101);
  ASSERT_EQ(p.thetas.size(), 101u);
  ASSERT_EQ(p.values.size(), 101u);
  EXPECT_EQ(p.thetas.front(), 0.0);
  EXPECT_LT(p.thetas.back(), std::numbers::pi);
  for (std::size_t i = 1; i < p.thetas.size(); ++i) EXPECT_GT(p.thetas[i], p.thetas[i - 1]);
  EXPECT_EQ(p.argmin_value, *std::min_element(p.values.begin(), p.values.end()));
}

TEST(AngularProfile, ConvergesUnderRefinement) {
  const Reference r;
  const auto coarse = angular_profile(r.spec, r.cov, RiskVariant::kLatent, 0.0, 4001);
  const auto fine = angular_profile(r.spec, r.cov, RiskVariant::kLatent, 0.0, 8001);
  EXPECT_LT(std::abs(coarse.argmin_theta - fine.argmin_theta), std::numbers::pi / 4001);
}

TEST(AngularProfile, IdenticalDecoupledModesAreFlat) {
  const auto spec = DynamicsSpec::two_dim(0.5, 0.5, 0.0, 0.2, 0.2);
  const auto p = angular_profile(spec, solve_covariance_closed_form(spec), RiskVariant::kLatent,
                                 0.0, 181);
  for (double v : p.values) EXPECT_NEAR(v, 0.2, 1e-14);
}

TEST(AngularProfile, CsvHasSpecLineAndRows) {
  const Reference r;
  const auto p = angular_profile(r.spec, r.cov, RiskVariant::kLatent, 0.0, 10);
  const std::string csv = profile_to_csv(p, r.spec);
  EXPECT_EQ(csv.rfind("# spec: ", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
}

TEST(AxisDeviation, FoldsToQuarterTurn) {
  EXPECT_DOUBLE_EQ(axis_deviation_deg(0.0), 0.0);
  EXPECT_NEAR(axis_deviation_deg(std::numbers::pi - 0.1), 0.1 * kDeg, 1e-12);
  EXPECT_NEAR(axis_deviation_deg(std::numbers::pi / 2), 90.0, 1e-12);
}

TEST(RiskVariant, StringRoundTrip) {
  for (auto v : {RiskVariant::kLatent, RiskVariant::kSystem, RiskVariant::kIb}) {
    EXPECT_EQ(risk_variant_from_string(to_string(v)), v);
  }
}
