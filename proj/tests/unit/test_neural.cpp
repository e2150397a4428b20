#include <cmath>
#include <limits>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "error_code.hpp"
#include "pcgap/neural.hpp"

using namespace pcgap;

namespace {

const DynamicsSpec kReference = DynamicsSpec::two_dim(0.05, 0.98, -0.90, 0.05, 0.10);

/// Fresh MLP and 8 random transitions, redrawn until no hidden
/// pre-activation lies within 1e-7 of the ReLU kink.
std::pair<MlpEncoder, TransitionSet> mlp_check_case(std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed, attempt);
    MlpEncoder model = MlpEncoder::init(64, rng);
    model.alpha = rng.uniform(-1, 1);
    TransitionSet data{Eigen::MatrixXd(2, 8), Eigen::MatrixXd(2, 8)};
    for (Eigen::Index i = 0; i < 8; ++i) {
      data.current.col(i) = Eigen::Vector2d(rng.normal(), rng.normal());
      data.next.col(i) = Eigen::Vector2d(rng.normal(), rng.normal());
    }
    if (min_abs_preactivation(model, data) > 1e-7) return {model, data};
  }
}

WindowSet gru_windows(int window_length, PredictionMode mode, int count, std::uint64_t seed) {
  const auto batch = sample_trajectories(kReference, count, window_length, seed);
  std::vector<int> all(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) all[static_cast<std::size_t>(i)] = i;
  return make_windows(batch, all, window_length, mode);
}

TrajectoryBatch constant_batch(int count, int length, std::uint64_t seed) {
  Rng rng(seed, 0);
  TrajectoryBatch batch;
  batch.seed = seed;
  for (int k = 0; k < count; ++k) {
    const Eigen::Vector2d x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    batch.states.push_back(x.replicate(1, length));
  }
  return batch;
}

}  // namespace

TEST(TrainConfig, ValidateAndJson) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.split_fraction = 1.0;
  EXPECT_EQ(oracle::code_of([&] { cfg.validate(); }), ErrorCode::kInvalidArgument);
  cfg.split_fraction = 0.8;
  cfg.epochs = 0;
  EXPECT_EQ(oracle::code_of([&] { cfg.validate(); }), ErrorCode::kInvalidArgument);
  cfg.epochs = 17;
  cfg.seed = 99;
  const nlohmann::json j = cfg;
  EXPECT_EQ(j.get<TrainConfig>(), cfg);
}

TEST(Glorot, BoundsAndDeterminism) {
  Rng a(1, 2), b(1, 2);
  const Eigen::MatrixXd m = glorot_uniform(30, 10, a);
  EXPECT_LE(m.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 40.0));
  EXPECT_EQ(m, glorot_uniform(30, 10, b));
}

TEST(Mlp, PackRoundTripAndForward) {
  Rng rng(3, 0);
  MlpEncoder m = MlpEncoder::init(16, rng);
  EXPECT_EQ(m.b1, Eigen::VectorXd::Zero(16));
  EXPECT_EQ(m.alpha, 0.0);
  EXPECT_EQ(m.pack().size(), m.parameter_count());
  MlpEncoder copy = MlpEncoder::init(16, rng);
  copy.unpack(m.pack());
  EXPECT_EQ(copy.pack(), m.pack());
  Eigen::MatrixXd x(2, 3);
  x << 0.1, -0.2, 0.3, 0.5, 0.0, -1.0;
  const Eigen::RowVectorXd y = m.forward(x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y(i), m.forward(Eigen::Vector2d(x.col(i))));
}

TEST(MlpGradient, CentralDifferencesAtInitialization) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto [model, data] = mlp_check_case(seed);
    EXPECT_LT(gradient_check(model, data, 1e-6), 1e-4) << "seed " << seed;
  }
}

TEST(MlpGradient, StepRobustness) {
  const auto [model, data] = mlp_check_case(11);
  const double e5 = gradient_check(model, data, 1e-5);
  const double e6 = gradient_check(model, data, 1e-6);
  EXPECT_LT(e5, 1e-4);
  EXPECT_LT(e6, 1e-4);
  // Below 1e-7 both errors are cancellation noise growing as 1/eps, so the
  // comparison is floored there.
  EXPECT_LT(std::abs(std::log10(std::max(e5, 1e-7) / std::max(e6, 1e-7))), 1.0);
}

TEST(MlpGradient, RejectsBadStep) {
  const auto [model, data] = mlp_check_case(1);
  EXPECT_EQ(oracle::code_of([&] { gradient_check(model, data, 1e-2); }),
            ErrorCode::kInvalidArgument);
}

TEST(Gru, OutputDimensions) {
  EXPECT_EQ(output_dim(PredictionMode::kGrounded), 1);
  EXPECT_EQ(output_dim(PredictionMode::kUnconstrained), 2);
  Rng rng(0, 0);
  const auto g = GruPredictor::init(2, 4, PredictionMode::kGrounded, rng);
  EXPECT_EQ(g.output(), 1);
  EXPECT_EQ(g.parameter_count(), 3 * 4 * 2 + 3 * 4 * 4 + 12 + 4 + 1);
  const auto w = gru_windows(4, PredictionMode::kGrounded, 3, 1);
  EXPECT_EQ(w.steps(), 3);
  EXPECT_EQ(w.targets.front().rows(), 1);
}

TEST(Gru, WindowsAreOneStepAhead) {
  const auto batch = sample_trajectories(kReference, 2, 10, 4);
  const auto w = make_windows(batch, {1}, 5, PredictionMode::kUnconstrained);
  EXPECT_EQ(w.size(), 6);
  EXPECT_EQ(w.steps(), 4);
  EXPECT_EQ(w.inputs[2].col(3), batch.states[1].col(5));
  EXPECT_EQ(w.targets[2].col(3), batch.states[1].col(6));
}

TEST(GruGradient, DirectionalThreeStepWindow) {
  Rng rng(5, 0);
  const auto model = GruPredictor::init(2, 4, PredictionMode::kUnconstrained, rng);
  const auto data = gru_windows(4, PredictionMode::kUnconstrained, 5, 6);
  EXPECT_LT(gru_directional_check(model, data, 1e-6, 6, 7), 1e-4);
}

TEST(GruGradient, EveryCoordinateBothModes) {
  for (auto mode : {PredictionMode::kGrounded, PredictionMode::kUnconstrained}) {
    Rng rng(9, 0);
    const auto model = GruPredictor::init(2, 4, mode, rng);
    const auto data = gru_windows(6, mode, 4, 10);
    EXPECT_LT(gradient_check(model, data, 1e-6), 1e-4) << to_string(mode);
  }
}

TEST(GruGradient, ZeroReadout) {
  Rng rng(13, 0);
  GruPredictor model = GruPredictor::init(2, 4, PredictionMode::kUnconstrained, rng);
  model.wo.setZero();
  model.bo.setZero();
  const auto data = gru_windows(4, PredictionMode::kUnconstrained, 5, 14);
  Eigen::VectorXd grad;
  gru_loss(model, data, &grad);

  // With a zero readout every prediction is 0, so the readout gradient is the
  // mean of -2 * target * h^T and nothing flows into the recurrent weights.
  const double scale = 1.0 / (data.steps() * static_cast<double>(data.size()) * model.output());
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 4);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, data.size());
  for (int t = 0; t < data.steps(); ++t) {
    h = model.step(data.inputs[static_cast<std::size_t>(t)], h);
    expected += -2.0 * scale * data.targets[static_cast<std::size_t>(t)] * h.transpose();
  }
  const Eigen::Index wo_at = model.wx.size() + model.wh.size() + model.b.size();
  const Eigen::Map<const Eigen::MatrixXd> dwo(grad.data() + wo_at, 2, 4);
  EXPECT_LT((dwo - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(grad.head(wo_at).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(gradient_check(model, data, 1e-6), 1e-4);
}

TEST(Gru, HiddenStateOverflow) {
  Rng rng(0, 0);
  const auto g = GruPredictor::init(2, 4, PredictionMode::kGrounded, rng);
  Eigen::MatrixXd seq = Eigen::MatrixXd::Zero(2, 3);
  seq(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(oracle::code_of([&] { g.final_hidden(seq); }), ErrorCode::kHiddenStateOverflow);
}

TEST(Split, PartitionAndDeterminism) {
  const auto [train, val] = split_trajectories(10, 0.8, 5);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(val.size(), 2u);
  std::vector<int> all(train);
  all.insert(all.end(), val.begin(), val.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
  EXPECT_EQ(split_trajectories(10, 0.8, 5), split_trajectories(10, 0.8, 5));
}

TEST(TrainMlp, DescendsRetainsAndIsDeterministic) {
  const auto batch = sample_trajectories(kReference, 60, 20, 21);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 3;
  cfg.hidden = 16;
  const auto a = train_mlp_encoder(batch, cfg);
  const auto b = train_mlp_encoder(batch, cfg);
  EXPECT_EQ(a.mlp().pack(), b.mlp().pack());
  ASSERT_EQ(a.loss_trace.size(), 40u);
  for (std::size_t i = 0; i < a.loss_trace.size(); ++i) {
    EXPECT_EQ(a.loss_trace[i].val_loss, b.loss_trace[i].val_loss);
  }
  EXPECT_LE(a.loss_trace.back().train_loss, a.initial_train_loss);

  double best = a.initial_validation_loss;
  for (const auto& e : a.loss_trace) best = std::min(best, e.val_loss);
  EXPECT_EQ(a.best_validation_loss, best);
  const auto val = make_transitions(batch, a.validation_trajectories);
  EXPECT_NEAR(mlp_loss(a.mlp(), val), a.best_validation_loss, 1e-12 * a.best_validation_loss);

  const std::string csv = loss_trace_csv(a);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
  const nlohmann::json j = a;
  EXPECT_EQ(j["params"]["kind"], "mlp");
  EXPECT_EQ(j["params"]["w1"]["shape"][0], 16);
}

TEST(TrainGru, DescendsRetainsAndIsDeterministic) {
  const auto batch = sample_trajectories(kReference, 12, 24, 22);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.window_length = 8;
  cfg.hidden = 6;
  cfg.seed = 1;
  const auto a = train_gru(batch, PredictionMode::kGrounded, cfg);
  const auto b = train_gru(batch, PredictionMode::kGrounded, cfg);
  EXPECT_EQ(a.gru().pack(), b.gru().pack());
  EXPECT_LE(a.loss_trace.back().train_loss, a.initial_train_loss);
  const auto val = make_windows(batch, a.validation_trajectories, 8, PredictionMode::kGrounded);
  EXPECT_NEAR(gru_loss(a.gru(), val), a.best_validation_loss, 1e-12 * a.best_validation_loss);
  const nlohmann::json j = a;
  EXPECT_EQ(j["params"]["gate_order"], "r,z,n");
}

TEST(TrainGru, ConstantTrajectoriesAreLearned) {
  const auto batch = constant_batch(40, 30, 2);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.window_length = 20;
  cfg.learning_rate = 1e-2;
  cfg.hidden = 8;
  const auto m = train_gru(batch, PredictionMode::kUnconstrained, cfg);
  EXPECT_LT(m.best_validation_loss, 1e-3);
  EXPECT_LT(m.best_validation_loss, 0.01 * m.initial_validation_loss);
}

TEST(Fidelity, TrivialEncoders) {
  const auto pts = stationary_points(kReference, 50, 1);
  EXPECT_NEAR(finite_diff_fidelity([](const Eigen::Vector2d& x) { return x(0); }, pts).fidelity,
              1.0, 1e-12);
  EXPECT_NEAR(finite_diff_fidelity([](const Eigen::Vector2d& x) { return x(1); }, pts).fidelity,
              0.0, 1e-12);
  EXPECT_NEAR(
      finite_diff_fidelity([](const Eigen::Vector2d& x) { return x(0) + x(1); }, pts).fidelity,
      0.5, 1e-9);
  EXPECT_EQ(oracle::code_of([&] {
              finite_diff_fidelity([](const Eigen::Vector2d&) { return 3.0; }, pts);
            }),
            ErrorCode::kAllDegenerate);
}

TEST(Fidelity, ScaleInvariant) {
  Rng rng(4, 0);
  const MlpEncoder m = MlpEncoder::init(16, rng);
  const auto pts = stationary_points(kReference, 200, 2);
  const double base = finite_diff_fidelity(m, pts).fidelity;
  for (double k : {-3.0, 0.5, 10.0}) {
    const auto scaled = [&](const Eigen::Vector2d& x) { return k * m.forward(x); };
    EXPECT_NEAR(finite_diff_fidelity(scaled, pts).fidelity, base, 1e-9);
  }
  EXPECT_GE(base, 0.0);
  EXPECT_LE(base, 1.0);
}

TEST(StationaryPoints, CovarianceAndDeterminism) {
  const auto a = stationary_points(kReference, 20000, 3);
  EXPECT_EQ(a.front(), stationary_points(kReference, 20000, 3).front());
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (const auto& x : a) acc += x * x.transpose();
  const auto sigma = solve_covariance_closed_form(kReference).sigma;
  EXPECT_LT((acc / 20000.0 - sigma).cwiseAbs().maxCoeff(), 0.1);
}
