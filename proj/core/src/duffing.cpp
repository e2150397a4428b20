#include "pcgap/duffing.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "pcgap/error.hpp"
#include "pcgap/rng.hpp"

namespace pcgap {
namespace {

void check_counts(int count, int length) {
  if (count <= 0 || length <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory count and length must be positive");
  }
}

Eigen::MatrixXd run_one(const DuffingParams& p, Eigen::Vector2d x, int length, Rng& rng) {
  Eigen::MatrixXd out(2, length);
  out.col(0) = x;
  for (int t = 1; t < length; ++t) {
    const double s = x[0];
    const double e = x[1];
    const double xs = rng.normal();
    const double xe = rng.normal();
    x[0] = s + (-p.alpha_s * s - p.beta_s * s * s * s + p.gamma_se * e + p.sigma_s * xs) * p.dt;
    x[1] = e + (-p.alpha_e * e + p.sigma_e * xe) * p.dt;
    if (!(std::abs(x[0]) <= kBlowupThreshold && std::abs(x[1]) <= kBlowupThreshold)) {
      throw Error(ErrorCode::kTrajectoryBlowup,
                  "Duffing trajectory left |x| <= 1e6 at step " + std::to_string(t));
    }
    out.col(t) = x;
  }
  return out;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double den = std::sqrt((da * da).sum() * (db * db).sum());
  return (da * db).sum() / den;
}

bool constant(const Eigen::VectorXd& v) { return (v.array() == v[0]).all(); }

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

}  // namespace

void DuffingParams::validate() const {
  const bool ok = dt > 0.0 && alpha_e > 0.0 && sigma_s >= 0.0 && sigma_e >= 0.0 &&
                  init_sd >= 0.0 && std::isfinite(alpha_s) && std::isfinite(beta_s) &&
                  std::isfinite(gamma_se) && std::isfinite(dt) && std::isfinite(alpha_e);
  if (!ok) {
    throw Error(ErrorCode::kInvalidArgument,
                "Duffing parameters need dt > 0, alpha_e > 0 and non-negative sigmas");
  }
}

TrajectoryBatch simulate(const DuffingParams& params, int count, int length, std::uint64_t seed) {
  params.validate();
  check_counts(count, length);
  TrajectoryBatch batch;
  batch.seed = seed;
  batch.dt_semantics = StepSemantics::kEuler;
  batch.states.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Rng rng(seed, static_cast<std::uint64_t>(k));
    const double s0 = params.init_sd * rng.normal();
    const double e0 = params.init_sd * rng.normal();
    batch.states.push_back(run_one(params, Eigen::Vector2d(s0, e0), length, rng));
  }
  return batch;
}

TrajectoryBatch simulate_from(const DuffingParams& params, const Eigen::Vector2d& x0, int count,
                              int length, std::uint64_t seed) {
  params.validate();
  check_counts(count, length);
  TrajectoryBatch batch;
  batch.seed = seed;
  batch.dt_semantics = StepSemantics::kEuler;
  for (int k = 0; k < count; ++k) {
    Rng rng(seed, static_cast<std::uint64_t>(k));
    batch.states.push_back(run_one(params, x0, length, rng));
  }
  return batch;
}

double euler_ou_stationary_variance(double alpha_e, double sigma_e, double dt) {
  // e' = (1 - alpha_e dt) e + sigma_e dt xi  =>  v = sigma_e^2 dt^2 / (1 - (1 - alpha_e dt)^2).
  return sigma_e * sigma_e * dt / (2.0 * alpha_e - alpha_e * alpha_e * dt);
}

DominanceReport dominance_from_states(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& s,
                                      const Eigen::VectorXd& e, double threshold) {
  if (hidden.rows() != s.size() || hidden.rows() != e.size()) {
    throw Error(ErrorCode::kInvalidArgument, "hidden states and correlates disagree in length");
  }
  if (hidden.rows() < 10) {
    throw Error(ErrorCode::kInvalidArgument, "dominance needs at least 10 test trajectories");
  }
  if (constant(s) || constant(e)) {
    throw Error(ErrorCode::kZeroVariance, "a correlate is constant across trajectories");
  }
  DominanceReport rep;
  rep.threshold = threshold;
  for (Eigen::Index j = 0; j < hidden.cols(); ++j) {
    const Eigen::VectorXd h = hidden.col(j);
    if (constant(h)) continue;
    rep.max_corr_s = std::max(rep.max_corr_s, std::abs(pearson(h, s)));
    rep.max_corr_e = std::max(rep.max_corr_e, std::abs(pearson(h, e)));
  }
  if (rep.max_corr_s > 0.0) {
    rep.ratio = rep.max_corr_e / rep.max_corr_s;
  } else {
    rep.ratio = rep.max_corr_e > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  rep.env_dominant = rep.ratio > threshold;
  return rep;
}

DominanceReport env_dominance(const TrainedModel& model, const TrajectoryBatch& test,
                              double threshold, CorrelateTime when) {
  const GruPredictor& gru = model.gru();
  const Eigen::Index n = test.count();
  if (n < 10) throw Error(ErrorCode::kInvalidArgument, "need at least 10 test trajectories");
  Eigen::MatrixXd hidden(n, gru.hidden());
  Eigen::VectorXd s(n), e(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::MatrixXd& traj = test.states[static_cast<std::size_t>(k)];
    hidden.row(k) = gru.final_hidden(traj).transpose();
    if (when == CorrelateTime::kFinal) {
      s[k] = traj(0, traj.cols() - 1);
      e[k] = traj(1, traj.cols() - 1);
    } else {
      s[k] = traj.row(0).mean();
      e[k] = traj.row(1).mean();
    }
  }
  return dominance_from_states(hidden, s, e, threshold);
}

Eigen::VectorXd trajectory_mse(const GruPredictor& model, const TrajectoryBatch& batch,
                               int window_length) {
  std::vector<int> all(static_cast<std::size_t>(batch.count()));
  std::iota(all.begin(), all.end(), 0);
  const WindowSet w = make_windows(batch, all, window_length, model.mode);
  const Eigen::VectorXd per_window = gru_window_errors(model, w);
  const Eigen::Index per = batch.length() - window_length + 1;
  Eigen::VectorXd out(batch.count());
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = per_window.segment(k * per, per).mean();
  return out;
}

OODReport inflation_from_errors(const Eigen::VectorXd& id, const Eigen::VectorXd& ood,
                                OodShift shift) {
  if (id.size() < 2 || ood.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "inflation needs at least two trajectories per set");
  }
  OODReport rep;
  rep.shift = shift;
  rep.mse_id = id.mean();
  rep.mse_ood = ood.mean();
  if (!(rep.mse_id > 0.0)) throw Error(ErrorCode::kZeroVariance, "in-distribution MSE is zero");
  rep.inflation = rep.mse_ood / rep.mse_id;
  auto rel_var_of_mean = [](const Eigen::VectorXd& v) {
    const double m = v.mean();
    const double var = (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
    return var / (static_cast<double>(v.size()) * m * m);
  };
  rep.inflation_se = rep.inflation * std::sqrt(rel_var_of_mean(id) + rel_var_of_mean(ood));
  return rep;
}

OODReport ood_inflation(const TrainedModel& model, const DuffingParams& params, int count,
                        std::uint64_t seed, int length, OodShift shift) {
  if (count < 10) throw Error(ErrorCode::kInvalidArgument, "OOD evaluation needs count >= 10");
  const GruPredictor& gru = model.gru();
  const int window = model.config.window_length;
  DuffingParams shifted = params;
  shifted.alpha_e *= shift.alpha_e_factor;
  shifted.sigma_e *= shift.sigma_e_factor;
  const TrajectoryBatch id = simulate(params, count, length, derive_seed(seed, {1}));
  const TrajectoryBatch ood = simulate(shifted, count, length, derive_seed(seed, {2}));
  return inflation_from_errors(trajectory_mse(gru, id, window), trajectory_mse(gru, ood, window),
                               shift);
}

const std::vector<std::string>& duffing_columns() {
  static const std::vector<std::string> cols = {
      "alpha_e",    "gamma_se",   "grounded", "seed",   "val_mse", "max_corr_s", "max_corr_e",
      "ratio",      "env_dominant", "mse_id", "mse_ood", "inflation", "status"};
  return cols;
}

SweepRecord duffing_task(double alpha_e, double gamma_se, bool grounded, std::uint64_t seed,
                         const DuffingTaskOptions& opts) {
  SweepRecord rec;
  rec.tier = Tier::kDuffing;
  rec.seed = seed;
  rec.config["alpha_e"] = alpha_e;
  rec.config["gamma_se"] = gamma_se;
  rec.config["grounded"] = grounded;
  try {
    DuffingParams p = opts.base;
    p.alpha_e = alpha_e;
    p.gamma_se = gamma_se;
    // Data streams depend on (alpha_e, gamma_se, seed) only, so the two
    // modes of one configuration see identical trajectories.
    const std::uint64_t task = derive_seed(seed, {bits(alpha_e), bits(gamma_se)});
    const TrajectoryBatch train = simulate(p, opts.train_trajectories, opts.length,
                                           derive_seed(task, {0}));
    TrainConfig cfg = opts.train;
    cfg.seed = derive_seed(task, {3});
    const TrainedModel model =
        train_gru(train, grounded ? PredictionMode::kGrounded : PredictionMode::kUnconstrained,
                  cfg);
    const std::uint64_t eval_seed = derive_seed(task, {4});
    const TrajectoryBatch test =
        simulate(p, opts.test_trajectories, opts.length, derive_seed(eval_seed, {1}));
    const DominanceReport dom = env_dominance(model, test, opts.dominance_threshold);
    const OODReport ood =
        ood_inflation(model, p, opts.test_trajectories, eval_seed, opts.length, opts.shift);
    rec.metrics["val_mse"] = model.best_validation_loss;
    rec.metrics["max_corr_s"] = dom.max_corr_s;
    rec.metrics["max_corr_e"] = dom.max_corr_e;
    rec.metrics["ratio"] = dom.ratio;
    rec.metrics["env_dominant"] = dom.env_dominant;
    rec.metrics["mse_id"] = ood.mse_id;
    rec.metrics["mse_ood"] = ood.mse_ood;
    rec.metrics["inflation"] = ood.inflation;
  } catch (const std::exception& ex) {
    rec.metrics = nlohmann::ordered_json::object();
    rec.failure = std::string(to_string(ErrorCode::kTaskFailed)) + ": " + ex.what();
  }
  return rec;
}

}  // namespace pcgap
