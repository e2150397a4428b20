#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcgap/lingauss.hpp"
#include "pcgap/neural.hpp"
#include "pcgap/record.hpp"

namespace pcgap {

/// Duffing system driven by a hidden OU environment, integrated by the Euler
/// map
///
///   s' = s + (-alpha_s s - beta_s s^3 + gamma_se e + sigma_s xi_s) dt
///   e' = e + (-alpha_e e + sigma_e xi_e) dt
///
/// Noise enters multiplied by dt, not sqrt(dt).
struct DuffingParams {
  double alpha_s = 0.5;
  double beta_s = 1.0;
  double gamma_se = 1.0;
  double sigma_s = 0.3;
  double alpha_e = 0.01;
  double sigma_e = 0.2;
  double dt = 0.05;
  /// Standard deviation of the Gaussian initial state.
  double init_sd = 0.1;

  /// Throws InvalidArgument unless dt > 0, alpha_e > 0, sigmas >= 0.
  void validate() const;
};

inline constexpr double kBlowupThreshold = 1e6;

/// Rows are (s, e). Throws TrajectoryBlowup past kBlowupThreshold.
TrajectoryBatch simulate(const DuffingParams& params, int count, int length, std::uint64_t seed);

/// Same, from a fixed initial state (no initial-state draw).
TrajectoryBatch simulate_from(const DuffingParams& params, const Eigen::Vector2d& x0, int count,
                              int length, std::uint64_t seed);

/// Stationary variance of the environment under the Euler map with
/// gamma_se irrelevant: sigma_e^2 dt / (2 alpha_e - alpha_e^2 dt).
double euler_ou_stationary_variance(double alpha_e, double sigma_e, double dt);

enum class CorrelateTime { kFinal, kMean };

struct DominanceReport {
  double max_corr_s = 0.0;
  double max_corr_e = 0.0;
  double ratio = 0.0;
  bool env_dominant = false;
  double threshold = 1.0;
};

/// Builds the report from per-trajectory hidden states (rows = trajectories)
/// and the matching s and e correlates. A constant hidden unit contributes a
/// correlation of 0; a constant correlate throws ZeroVariance.
DominanceReport dominance_from_states(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& s,
                                      const Eigen::VectorXd& e, double threshold = 1.0);

/// Pearson correlations between final hidden units and final-time (or
/// time-mean) s and e across test trajectories.
DominanceReport env_dominance(const TrainedModel& model, const TrajectoryBatch& test,
                              double threshold = 1.0,
                              CorrelateTime when = CorrelateTime::kFinal);

struct OodShift {
  double alpha_e_factor = 3.0;
  double sigma_e_factor = 2.0;
};

struct OODReport {
  double mse_id = 0.0;
  double mse_ood = 0.0;
  double inflation = 0.0;
  /// Delta-method standard error of the inflation from trajectory-level MSEs.
  double inflation_se = 0.0;
  OodShift shift;
};

/// Per-trajectory next-step MSE of a trained GRU on fresh windows.
Eigen::VectorXd trajectory_mse(const GruPredictor& model, const TrajectoryBatch& batch,
                               int window_length);

/// In-distribution MSE on `count` fresh trajectories from params and OOD MSE
/// on `count` trajectories from the shifted params.
OODReport ood_inflation(const TrainedModel& model, const DuffingParams& params, int count,
                        std::uint64_t seed, int length = 80, OodShift shift = {});

/// Ratio statistics from precomputed trajectory-level MSEs.
OODReport inflation_from_errors(const Eigen::VectorXd& id, const Eigen::VectorXd& ood,
                                OodShift shift);

struct DuffingTaskOptions {
  DuffingParams base;
  int train_trajectories = 40;
  int length = 80;
  int test_trajectories = 200;
  TrainConfig train{.learning_rate = 1e-3, .epochs = 60, .batch_size = 64, .window_length = 20};
  double dominance_threshold = 1.0;
  OodShift shift;
};

/// simulate -> train_gru -> env_dominance + ood_inflation. Never throws for
/// task-level failures; they come back as a failed record.
SweepRecord duffing_task(double alpha_e, double gamma_se, bool grounded, std::uint64_t seed,
                         const DuffingTaskOptions& opts = {});

/// Frozen CSV column order for Duffing records.
const std::vector<std::string>& duffing_columns();

}  // namespace pcgap
