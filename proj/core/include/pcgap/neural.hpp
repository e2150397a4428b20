#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "pcgap/lingauss.hpp"
#include "pcgap/rng.hpp"

namespace pcgap {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 2000;
  /// Mini-batch size in windows (GRU). The MLP always uses the full batch.
  int batch_size = 64;
  int window_length = 20;
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  /// Hidden width; 0 selects the architecture default (64 MLP, 32 GRU).
  int hidden = 0;

  /// Throws InvalidArgument unless 0 < split_fraction < 1 and all counts are
  /// positive.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Adam with bias-corrected moments (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

/// Glorot-uniform matrix: entries in +-sqrt(6 / (fan_in + fan_out)).
Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// ---------------------------------------------------------------------------
// MLP encoder

/// phi(x) = w2 relu(W1 x + b1) + b2 on x = (s, e), with a scalar predictor
/// gain alpha trained jointly on (phi(x_{t+1}) - alpha phi(x_t))^2.
struct MlpEncoder {
  Eigen::MatrixXd w1;     // hidden x 2
  Eigen::VectorXd b1;     // hidden
  Eigen::RowVectorXd w2;  // 1 x hidden
  double b2 = 0.0;
  double alpha = 0.0;

  static MlpEncoder init(int hidden, Rng& rng);

  int hidden() const { return static_cast<int>(b1.size()); }
  Eigen::Index parameter_count() const { return 4 * b1.size() + 2; }
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& p);

  double forward(const Eigen::Vector2d& x) const;
  /// 2 x B inputs to 1 x B outputs.
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& x) const;
};

/// Consecutive pairs (x_t, x_{t+1}) stored column-wise.
struct TransitionSet {
  Eigen::MatrixXd current;
  Eigen::MatrixXd next;
  Eigen::Index size() const { return current.cols(); }
};

TransitionSet make_transitions(const TrajectoryBatch& batch, const std::vector<int>& which);

/// Mean latent self-prediction loss and, if `grad` is non-null, its gradient
/// with respect to pack() ordering.
double mlp_loss(const MlpEncoder& model, const TransitionSet& data,
                Eigen::VectorXd* grad = nullptr);

// ---------------------------------------------------------------------------
// GRU predictor

enum class PredictionMode { kGrounded, kUnconstrained };
std::string_view to_string(PredictionMode m);

/// Single-layer GRU with a linear readout. Gate equations (reset applied to
/// the hidden state before the candidate transform):
///
///   r  = sigmoid(Wx_r x + Wh_r h + b_r)
///   z  = sigmoid(Wx_z x + Wh_z h + b_z)
///   n  = tanh(Wx_n x + Wh_n (r * h) + b_n)
///   h' = (1 - z) * n + z * h
///   y  = Wo h' + bo
///
/// Gate blocks are stacked in the order r, z, n. The readout predicts the next
/// state: s only when grounded, (s, e) when unconstrained.
struct GruPredictor {
  Eigen::MatrixXd wx;  // 3H x input
  Eigen::MatrixXd wh;  // 3H x H
  Eigen::VectorXd b;   // 3H
  Eigen::MatrixXd wo;  // output x H
  Eigen::VectorXd bo;  // output
  PredictionMode mode = PredictionMode::kUnconstrained;

  static GruPredictor init(int input, int hidden, PredictionMode mode, Rng& rng);

  int hidden() const { return static_cast<int>(wh.cols()); }
  int input() const { return static_cast<int>(wx.cols()); }
  int output() const { return static_cast<int>(wo.rows()); }
  Eigen::Index parameter_count() const;
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& p);

  /// One recurrent step for a batch (columns).
  Eigen::MatrixXd step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h) const;
  /// Hidden state after consuming every column of `sequence` from h = 0.
  /// Throws HiddenStateOverflow on a non-finite state.
  Eigen::VectorXd final_hidden(const Eigen::MatrixXd& sequence) const;
};

/// Output dimension for a prediction mode: 1 grounded, 2 unconstrained.
int output_dim(PredictionMode mode);

/// Fixed-length windows with stride 1. inputs[t] and targets[t] are
/// (dim x B) and (output x B); targets are the states one step ahead.
struct WindowSet {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> targets;
  Eigen::Index size() const { return inputs.empty() ? 0 : inputs.front().cols(); }
  int steps() const { return static_cast<int>(inputs.size()); }
};

WindowSet make_windows(const TrajectoryBatch& batch, const std::vector<int>& which,
                       int window_length, PredictionMode mode);
/// Columns `cols` of a window set.
WindowSet select_windows(const WindowSet& all, const std::vector<Eigen::Index>& cols);

/// Mean next-step MSE over all steps, windows and outputs; with BPTT
/// gradient when `grad` is non-null.
double gru_loss(const GruPredictor& model, const WindowSet& data,
                Eigen::VectorXd* grad = nullptr);

/// Per-window mean squared error (one entry per window column).
Eigen::VectorXd gru_window_errors(const GruPredictor& model, const WindowSet& data);

// ---------------------------------------------------------------------------
// Training

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainedModel {
  std::variant<MlpEncoder, GruPredictor> params;
  double best_validation_loss = 0.0;
  int best_epoch = 0;
  double initial_train_loss = 0.0;
  double initial_validation_loss = 0.0;
  std::vector<EpochLoss> loss_trace;
  std::uint64_t seed = 0;
  TrainConfig config;
  /// Trajectory indices used for validation.
  std::vector<int> validation_trajectories;

  const MlpEncoder& mlp() const { return std::get<MlpEncoder>(params); }
  const GruPredictor& gru() const { return std::get<GruPredictor>(params); }
};

/// Splits trajectory indices [0, count) into (train, validation) after a
/// seeded shuffle.
std::pair<std::vector<int>, std::vector<int>> split_trajectories(int count, double train_fraction,
                                                                 std::uint64_t seed);

/// Full-batch Adam on the latent self-prediction loss; keeps the parameters
/// with the lowest validation loss over epochs.
TrainedModel train_mlp_encoder(const TrajectoryBatch& batch, const TrainConfig& cfg);

/// Mini-batch Adam with BPTT over stride-1 windows; keeps the parameters with
/// the lowest validation loss over epochs.
TrainedModel train_gru(const TrajectoryBatch& batch, PredictionMode mode, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Diagnostics

struct FidelityResult {
  double fidelity = 0.0;
  int used = 0;
  int excluded = 0;
};

/// Mean of |dphi/ds| / (|dphi/ds| + |dphi/de|) over `points`, partials by
/// centered differences with step h. Points where both partials fall below
/// 1e-12 are excluded; AllDegenerate is thrown if nothing is left.
FidelityResult finite_diff_fidelity(const std::function<double(const Eigen::Vector2d&)>& phi,
                                    const std::vector<Eigen::Vector2d>& points, double h = 1e-4);
FidelityResult finite_diff_fidelity(const MlpEncoder& model,
                                    const std::vector<Eigen::Vector2d>& points, double h = 1e-4);

/// i.i.d. draws from the stationary law of a 2D spec.
std::vector<Eigen::Vector2d> stationary_points(const DynamicsSpec& spec, int count,
                                               std::uint64_t seed);

/// Largest relative error |fd - g| / max(|fd|, |g|, 1e-6) between analytic
/// parameter gradients and central differences with step `eps`. Models with
/// more than 256 parameters are checked on a seeded subset of 64
/// coordinates.
double gradient_check(const MlpEncoder& model, const TransitionSet& data, double eps,
                      std::uint64_t seed = 0);
double gradient_check(const GruPredictor& model, const WindowSet& data, double eps,
                      std::uint64_t seed = 0);

/// Directional version: relative error of g.d against the central difference
/// along each of `directions` random unit directions.
double gru_directional_check(const GruPredictor& model, const WindowSet& data, double eps,
                             int directions, std::uint64_t seed);

/// Minimum |pre-activation| of the hidden layer over the data.
double min_abs_preactivation(const MlpEncoder& model, const TransitionSet& data);

void to_json(nlohmann::json& j, const TrainedModel& model);
/// (epoch, train_loss, val_loss) rows with header.
std::string loss_trace_csv(const TrainedModel& model);

}  // namespace pcgap
