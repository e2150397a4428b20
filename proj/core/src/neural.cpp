#include "pcgap/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcgap/error.hpp"
#include "pcgap/linalg.hpp"

namespace pcgap {
namespace {

constexpr double kDegeneratePartial = 1e-12;
constexpr double kRelErrFloor = 1e-6;
constexpr Eigen::Index kFullCheckLimit = 256;
constexpr int kSubsetCoords = 64;

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& a) { return 1.0 / (1.0 + (-a).exp()); }

void check_finite_loss(double loss) {
  if (!std::isfinite(loss)) throw Error(ErrorCode::kDivergedLoss, "training loss is not finite");
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kRelErrFloor});
}

template <typename Model, typename LossFn>
double coordinate_check(const Model& model, LossFn&& loss, double eps, std::uint64_t seed) {
  if (!(eps >= 1e-8 && eps <= 1e-4)) {
    throw Error(ErrorCode::kInvalidArgument, "gradient_check: eps must lie in [1e-8, 1e-4]");
  }
  const Eigen::VectorXd p0 = model.pack();
  Eigen::VectorXd grad;
  loss(model, &grad);

  std::vector<Eigen::Index> coords(static_cast<std::size_t>(p0.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (p0.size() > kFullCheckLimit) {
    Rng rng(seed, 0x6763);
    shuffle(coords, rng);
    coords.resize(kSubsetCoords);
  }

  Model probe = model;
  double worst = 0.0;
  for (Eigen::Index i : coords) {
    Eigen::VectorXd p = p0;
    p[i] = p0[i] + eps;
    probe.unpack(p);
    const double up = loss(probe, nullptr);
    p[i] = p0[i] - eps;
    probe.unpack(p);
    const double down = loss(probe, nullptr);
    worst = std::max(worst, rel_err((up - down) / (2.0 * eps), grad[i]));
  }
  return worst;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split_fraction must lie in (0, 1)");
  }
  if (epochs <= 0 || batch_size <= 0 || window_length < 2 || hidden < 0) {
    throw Error(ErrorCode::kInvalidArgument, "training counts must be positive");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be positive");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
       {"batch_size", cfg.batch_size},       {"window_length", cfg.window_length},
       {"split_fraction", cfg.split_fraction}, {"seed", cfg.seed},
       {"hidden", cfg.hidden}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  TrainConfig d;
  cfg.learning_rate = j.value("learning_rate", d.learning_rate);
  cfg.epochs = j.value("epochs", d.epochs);
  cfg.batch_size = j.value("batch_size", d.batch_size);
  cfg.window_length = j.value("window_length", d.window_length);
  cfg.split_fraction = j.value("split_fraction", d.split_fraction);
  cfg.seed = j.value("seed", d.seed);
  cfg.hidden = j.value("hidden", d.hidden);
}

Adam::Adam(Eigen::Index size, double learning_rate)
    : lr_(learning_rate), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill keeps the draw order independent of Eigen's storage.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

// ---------------------------------------------------------------------------
// MLP

MlpEncoder MlpEncoder::init(int hidden, Rng& rng) {
  if (hidden <= 0) throw Error(ErrorCode::kInvalidArgument, "hidden width must be positive");
  MlpEncoder m;
  m.w1 = glorot_uniform(hidden, 2, rng);
  m.b1 = Eigen::VectorXd::Zero(hidden);
  m.w2 = glorot_uniform(1, hidden, rng);
  m.b2 = 0.0;
  m.alpha = 0.0;
  return m;
}

Eigen::VectorXd MlpEncoder::pack() const {
  const Eigen::Index h = b1.size();
  Eigen::VectorXd p(parameter_count());
  p.segment(0, h) = w1.col(0);
  p.segment(h, h) = w1.col(1);
  p.segment(2 * h, h) = b1;
  p.segment(3 * h, h) = w2.transpose();
  p[4 * h] = b2;
  p[4 * h + 1] = alpha;
  return p;
}

void MlpEncoder::unpack(const Eigen::VectorXd& p) {
  const Eigen::Index h = b1.size();
  if (p.size() != parameter_count()) {
    throw Error(ErrorCode::kInvalidArgument, "MLP parameter vector has the wrong size");
  }
  w1.col(0) = p.segment(0, h);
  w1.col(1) = p.segment(h, h);
  b1 = p.segment(2 * h, h);
  w2 = p.segment(3 * h, h).transpose();
  b2 = p[4 * h];
  alpha = p[4 * h + 1];
}

double MlpEncoder::forward(const Eigen::Vector2d& x) const {
  return (w2 * (w1 * x + b1).cwiseMax(0.0))(0) + b2;
}

Eigen::RowVectorXd MlpEncoder::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = (w1 * x).colwise() + b1;
  return (w2 * z.cwiseMax(0.0)).array() + b2;
}

TransitionSet make_transitions(const TrajectoryBatch& batch, const std::vector<int>& which) {
  if (batch.dim() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "MLP encoder expects two-dimensional states");
  }
  const int len = batch.length();
  if (len < 2) throw Error(ErrorCode::kInvalidArgument, "trajectories need at least 2 steps");
  const Eigen::Index per = len - 1;
  TransitionSet t;
  t.current.resize(2, per * static_cast<Eigen::Index>(which.size()));
  t.next.resize(2, t.current.cols());
  Eigen::Index col = 0;
  for (int k : which) {
    const Eigen::MatrixXd& s = batch.states.at(static_cast<std::size_t>(k));
    t.current.middleCols(col, per) = s.leftCols(per);
    t.next.middleCols(col, per) = s.rightCols(per);
    col += per;
  }
  return t;
}

double mlp_loss(const MlpEncoder& model, const TransitionSet& data, Eigen::VectorXd* grad) {
  const Eigen::Index n = data.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "no transitions");
  const Eigen::MatrixXd z0 = (model.w1 * data.current).colwise() + model.b1;
  const Eigen::MatrixXd z1 = (model.w1 * data.next).colwise() + model.b1;
  const Eigen::MatrixXd h0 = z0.cwiseMax(0.0);
  const Eigen::MatrixXd h1 = z1.cwiseMax(0.0);
  const Eigen::RowVectorXd y0 = (model.w2 * h0).array() + model.b2;
  const Eigen::RowVectorXd y1 = (model.w2 * h1).array() + model.b2;
  const Eigen::RowVectorXd r = y1 - model.alpha * y0;
  const double loss = r.squaredNorm() / static_cast<double>(n);
  if (grad == nullptr) return loss;

  const Eigen::RowVectorXd dr = (2.0 / static_cast<double>(n)) * r;
  const Eigen::RowVectorXd dy1 = dr;
  const Eigen::RowVectorXd dy0 = -model.alpha * dr;
  const Eigen::MatrixXd dz1 =
      ((model.w2.transpose() * dy1).array() * (z1.array() > 0.0).cast<double>()).matrix();
  const Eigen::MatrixXd dz0 =
      ((model.w2.transpose() * dy0).array() * (z0.array() > 0.0).cast<double>()).matrix();
  const Eigen::MatrixXd dw1 = dz1 * data.next.transpose() + dz0 * data.current.transpose();

  const Eigen::Index h = model.b1.size();
  grad->resize(model.parameter_count());
  grad->segment(0, h) = dw1.col(0);
  grad->segment(h, h) = dw1.col(1);
  grad->segment(2 * h, h) = dz1.rowwise().sum() + dz0.rowwise().sum();
  grad->segment(3 * h, h) = (h1 * dy1.transpose() + h0 * dy0.transpose());
  (*grad)[4 * h] = dy1.sum() + dy0.sum();
  (*grad)[4 * h + 1] = -dr.dot(y0);
  return loss;
}

double min_abs_preactivation(const MlpEncoder& model, const TransitionSet& data) {
  const Eigen::MatrixXd z0 = (model.w1 * data.current).colwise() + model.b1;
  const Eigen::MatrixXd z1 = (model.w1 * data.next).colwise() + model.b1;
  return std::min(z0.cwiseAbs().minCoeff(), z1.cwiseAbs().minCoeff());
}

// ---------------------------------------------------------------------------
// GRU

std::string_view to_string(PredictionMode m) {
  return m == PredictionMode::kGrounded ? "grounded" : "unconstrained";
}

int output_dim(PredictionMode mode) { return mode == PredictionMode::kGrounded ? 1 : 2; }

GruPredictor GruPredictor::init(int input, int hidden, PredictionMode mode, Rng& rng) {
  if (input <= 0 || hidden <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "GRU sizes must be positive");
  }
  GruPredictor g;
  g.mode = mode;
  g.wx.resize(3 * hidden, input);
  g.wh.resize(3 * hidden, hidden);
  // Each gate block is its own weight matrix for the fan computation.
  for (int k = 0; k < 3; ++k) {
    g.wx.middleRows(k * hidden, hidden) = glorot_uniform(hidden, input, rng);
    g.wh.middleRows(k * hidden, hidden) = glorot_uniform(hidden, hidden, rng);
  }
  g.b = Eigen::VectorXd::Zero(3 * hidden);
  g.wo = glorot_uniform(output_dim(mode), hidden, rng);
  g.bo = Eigen::VectorXd::Zero(output_dim(mode));
  return g;
}

Eigen::Index GruPredictor::parameter_count() const {
  return wx.size() + wh.size() + b.size() + wo.size() + bo.size();
}

Eigen::VectorXd GruPredictor::pack() const {
  Eigen::VectorXd p(parameter_count());
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    p.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  };
  put(wx);
  put(wh);
  put(b);
  put(wo);
  put(bo);
  return p;
}

void GruPredictor::unpack(const Eigen::VectorXd& p) {
  if (p.size() != parameter_count()) {
    throw Error(ErrorCode::kInvalidArgument, "GRU parameter vector has the wrong size");
  }
  Eigen::Index at = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = p.segment(at, m.size());
    at += m.size();
  };
  take(wx);
  take(wh);
  take(b);
  take(wo);
  take(bo);
}

Eigen::MatrixXd GruPredictor::step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h) const {
  const Eigen::Index hs = hidden();
  const Eigen::MatrixXd ax = (wx * x).colwise() + b;
  const Eigen::ArrayXXd r = sigmoid(ax.topRows(hs) + wh.topRows(hs) * h);
  const Eigen::ArrayXXd z = sigmoid(ax.middleRows(hs, hs) + wh.middleRows(hs, hs) * h);
  const Eigen::MatrixXd g = (r * h.array()).matrix();
  const Eigen::ArrayXXd n = (ax.bottomRows(hs) + wh.bottomRows(hs) * g).array().tanh();
  return ((1.0 - z) * n + z * h.array()).matrix();
}

Eigen::VectorXd GruPredictor::final_hidden(const Eigen::MatrixXd& sequence) const {
  Eigen::MatrixXd h = Eigen::VectorXd::Zero(hidden());
  for (Eigen::Index t = 0; t < sequence.cols(); ++t) {
    h = step(sequence.col(t), h);
  }
  if (!h.allFinite()) {
    throw Error(ErrorCode::kHiddenStateOverflow, "GRU hidden state is not finite");
  }
  return h;
}

WindowSet make_windows(const TrajectoryBatch& batch, const std::vector<int>& which,
                       int window_length, PredictionMode mode) {
  if (window_length < 2 || batch.length() < window_length) {
    throw Error(ErrorCode::kInvalidArgument, "trajectories are shorter than one window");
  }
  const int steps = window_length - 1;
  const int per = batch.length() - window_length + 1;
  const int out = output_dim(mode);
  const Eigen::Index total = static_cast<Eigen::Index>(per) * static_cast<Eigen::Index>(which.size());
  WindowSet w;
  w.inputs.assign(static_cast<std::size_t>(steps), Eigen::MatrixXd(batch.dim(), total));
  w.targets.assign(static_cast<std::size_t>(steps), Eigen::MatrixXd(out, total));
  Eigen::Index col = 0;
  for (int k : which) {
    const Eigen::MatrixXd& s = batch.states.at(static_cast<std::size_t>(k));
    for (int start = 0; start < per; ++start, ++col) {
      for (int t = 0; t < steps; ++t) {
        w.inputs[static_cast<std::size_t>(t)].col(col) = s.col(start + t);
        w.targets[static_cast<std::size_t>(t)].col(col) = s.col(start + t + 1).head(out);
      }
    }
  }
  return w;
}

WindowSet select_windows(const WindowSet& all, const std::vector<Eigen::Index>& cols) {
  WindowSet w;
  w.inputs.reserve(all.inputs.size());
  w.targets.reserve(all.targets.size());
  for (std::size_t t = 0; t < all.inputs.size(); ++t) {
    w.inputs.emplace_back(all.inputs[t](Eigen::all, cols));
    w.targets.emplace_back(all.targets[t](Eigen::all, cols));
  }
  return w;
}

namespace {

struct GruTape {
  std::vector<Eigen::MatrixXd> h;  // h[0] = 0, h[t+1] after input t
  std::vector<Eigen::ArrayXXd> r, z, n;
  std::vector<Eigen::MatrixXd> y;
};

GruTape gru_forward(const GruPredictor& m, const WindowSet& data) {
  const Eigen::Index hs = m.hidden();
  const Eigen::Index batch = data.size();
  const auto steps = data.inputs.size();
  GruTape tape;
  tape.h.reserve(steps + 1);
  tape.h.emplace_back(Eigen::MatrixXd::Zero(hs, batch));
  tape.r.reserve(steps);
  tape.z.reserve(steps);
  tape.n.reserve(steps);
  tape.y.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::MatrixXd& h = tape.h.back();
    const Eigen::MatrixXd ax = (m.wx * data.inputs[t]).colwise() + m.b;
    Eigen::ArrayXXd r = sigmoid(ax.topRows(hs) + m.wh.topRows(hs) * h);
    Eigen::ArrayXXd z = sigmoid(ax.middleRows(hs, hs) + m.wh.middleRows(hs, hs) * h);
    const Eigen::MatrixXd g = (r * h.array()).matrix();
    Eigen::ArrayXXd n = (ax.bottomRows(hs) + m.wh.bottomRows(hs) * g).array().tanh();
    Eigen::MatrixXd hn = ((1.0 - z) * n + z * h.array()).matrix();
    if (!hn.allFinite()) {
      throw Error(ErrorCode::kHiddenStateOverflow, "GRU hidden state is not finite");
    }
    tape.y.emplace_back((m.wo * hn).colwise() + m.bo);
    tape.r.push_back(std::move(r));
    tape.z.push_back(std::move(z));
    tape.n.push_back(std::move(n));
    tape.h.push_back(std::move(hn));
  }
  return tape;
}

}  // namespace

double gru_loss(const GruPredictor& model, const WindowSet& data, Eigen::VectorXd* grad) {
  if (data.size() == 0 || data.steps() == 0) throw Error(ErrorCode::kEmptyInput, "no windows");
  const GruTape tape = gru_forward(model, data);
  const auto steps = data.inputs.size();
  const double scale =
      1.0 / (static_cast<double>(steps) * static_cast<double>(data.size()) * model.output());
  double sse = 0.0;
  for (std::size_t t = 0; t < steps; ++t) sse += (tape.y[t] - data.targets[t]).squaredNorm();
  const double loss = sse * scale;
  if (grad == nullptr) return loss;

  const Eigen::Index hs = model.hidden();
  Eigen::MatrixXd dwx = Eigen::MatrixXd::Zero(model.wx.rows(), model.wx.cols());
  Eigen::MatrixXd dwh = Eigen::MatrixXd::Zero(model.wh.rows(), model.wh.cols());
  Eigen::VectorXd db = Eigen::VectorXd::Zero(model.b.size());
  Eigen::MatrixXd dwo = Eigen::MatrixXd::Zero(model.wo.rows(), model.wo.cols());
  Eigen::VectorXd dbo = Eigen::VectorXd::Zero(model.bo.size());
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(hs, data.size());
  Eigen::MatrixXd da(3 * hs, data.size());

  for (std::size_t t = steps; t-- > 0;) {
    const Eigen::MatrixXd& h = tape.h[t];
    const Eigen::MatrixXd& hn = tape.h[t + 1];
    const Eigen::ArrayXXd& r = tape.r[t];
    const Eigen::ArrayXXd& z = tape.z[t];
    const Eigen::ArrayXXd& n = tape.n[t];

    const Eigen::MatrixXd dy = 2.0 * scale * (tape.y[t] - data.targets[t]);
    dwo.noalias() += dy * hn.transpose();
    dbo += dy.rowwise().sum();
    const Eigen::ArrayXXd dhn = (model.wo.transpose() * dy + dh_next).array();

    const Eigen::ArrayXXd dan = dhn * (1.0 - z) * (1.0 - n.square());
    const Eigen::ArrayXXd daz = dhn * (h.array() - n) * z * (1.0 - z);
    const Eigen::MatrixXd dg = model.wh.bottomRows(hs).transpose() * dan.matrix();
    const Eigen::ArrayXXd dar = dg.array() * h.array() * r * (1.0 - r);

    da.topRows(hs) = dar.matrix();
    da.middleRows(hs, hs) = daz.matrix();
    da.bottomRows(hs) = dan.matrix();

    dwx.noalias() += da * data.inputs[t].transpose();
    db += da.rowwise().sum();
    dwh.topRows(hs).noalias() += da.topRows(hs) * h.transpose();
    dwh.middleRows(hs, hs).noalias() += da.middleRows(hs, hs) * h.transpose();
    dwh.bottomRows(hs).noalias() += da.bottomRows(hs) * (r * h.array()).matrix().transpose();

    dh_next = (dhn * z).matrix() + (dg.array() * r).matrix() +
              model.wh.topRows(hs).transpose() * da.topRows(hs) +
              model.wh.middleRows(hs, hs).transpose() * da.middleRows(hs, hs);
  }

  GruPredictor shaped = model;
  shaped.wx = dwx;
  shaped.wh = dwh;
  shaped.b = db;
  shaped.wo = dwo;
  shaped.bo = dbo;
  *grad = shaped.pack();
  return loss;
}

Eigen::VectorXd gru_window_errors(const GruPredictor& model, const WindowSet& data) {
  const GruTape tape = gru_forward(model, data);
  Eigen::VectorXd err = Eigen::VectorXd::Zero(data.size());
  for (std::size_t t = 0; t < tape.y.size(); ++t) {
    err += (tape.y[t] - data.targets[t]).colwise().squaredNorm().transpose();
  }
  return err / (static_cast<double>(tape.y.size()) * model.output());
}

// ---------------------------------------------------------------------------
// Training

std::pair<std::vector<int>, std::vector<int>> split_trajectories(int count, double train_fraction,
                                                                 std::uint64_t seed) {
  if (count < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two trajectories");
  std::vector<int> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed, 0x5350);
  shuffle(idx, rng);
  int n_train = static_cast<int>(std::lround(train_fraction * count));
  n_train = std::clamp(n_train, 1, count - 1);
  std::vector<int> train(idx.begin(), idx.begin() + n_train);
  std::vector<int> val(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

TrainedModel train_mlp_encoder(const TrajectoryBatch& batch, const TrainConfig& cfg) {
  cfg.validate();
  if (batch.length() < 2) throw Error(ErrorCode::kInvalidArgument, "trajectories too short");
  auto [train_idx, val_idx] = split_trajectories(batch.count(), cfg.split_fraction, cfg.seed);
  const TransitionSet train = make_transitions(batch, train_idx);
  const TransitionSet val = make_transitions(batch, val_idx);

  Rng rng(cfg.seed, 0x4d4c50);
  MlpEncoder model = MlpEncoder::init(cfg.hidden > 0 ? cfg.hidden : 64, rng);
  Eigen::VectorXd params = model.pack();
  Adam adam(params.size(), cfg.learning_rate);

  TrainedModel out;
  out.seed = cfg.seed;
  out.config = cfg;
  out.validation_trajectories = val_idx;
  out.initial_train_loss = mlp_loss(model, train);
  out.initial_validation_loss = mlp_loss(model, val);
  out.best_validation_loss = std::numeric_limits<double>::infinity();
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));

  MlpEncoder best = model;
  Eigen::VectorXd grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    check_finite_loss(mlp_loss(model, train, &grad));
    if (!grad.allFinite()) throw Error(ErrorCode::kDivergedLoss, "non-finite MLP gradient");
    adam.step(params, grad);
    model.unpack(params);
    const double tr = mlp_loss(model, train);
    const double va = mlp_loss(model, val);
    check_finite_loss(tr);
    check_finite_loss(va);
    out.loss_trace.push_back({epoch, tr, va});
    if (va < out.best_validation_loss) {
      out.best_validation_loss = va;
      out.best_epoch = epoch;
      best = model;
    }
  }
  out.params = best;
  return out;
}

TrainedModel train_gru(const TrajectoryBatch& batch, PredictionMode mode, const TrainConfig& cfg) {
  cfg.validate();
  auto [train_idx, val_idx] = split_trajectories(batch.count(), cfg.split_fraction, cfg.seed);
  const WindowSet train = make_windows(batch, train_idx, cfg.window_length, mode);
  const WindowSet val = make_windows(batch, val_idx, cfg.window_length, mode);

  Rng rng(cfg.seed, 0x475255);
  GruPredictor model = GruPredictor::init(batch.dim(), cfg.hidden > 0 ? cfg.hidden : 32, mode, rng);
  Eigen::VectorXd params = model.pack();
  Adam adam(params.size(), cfg.learning_rate);

  TrainedModel out;
  out.seed = cfg.seed;
  out.config = cfg;
  out.validation_trajectories = val_idx;
  out.initial_train_loss = gru_loss(model, train);
  out.initial_validation_loss = gru_loss(model, val);
  out.best_validation_loss = std::numeric_limits<double>::infinity();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffler(cfg.seed, 0x534846);
  GruPredictor best = model;
  Eigen::VectorXd grad;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, shuffler);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::vector<Eigen::Index> cols(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(
                                                               std::min(order.size(), start + bs)));
      check_finite_loss(gru_loss(model, select_windows(train, cols), &grad));
      if (!grad.allFinite()) throw Error(ErrorCode::kDivergedLoss, "non-finite GRU gradient");
      adam.step(params, grad);
      model.unpack(params);
    }
    const double tr = gru_loss(model, train);
    const double va = gru_loss(model, val);
    check_finite_loss(tr);
    check_finite_loss(va);
    out.loss_trace.push_back({epoch, tr, va});
    if (va < out.best_validation_loss) {
      out.best_validation_loss = va;
      out.best_epoch = epoch;
      best = model;
    }
  }
  out.params = best;
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

FidelityResult finite_diff_fidelity(const std::function<double(const Eigen::Vector2d&)>& phi,
                                    const std::vector<Eigen::Vector2d>& points, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be > 0");
  FidelityResult res;
  double sum = 0.0;
  for (const Eigen::Vector2d& x : points) {
    const Eigen::Vector2d ds(h, 0.0), de(0.0, h);
    const double gs = std::abs(phi(x + ds) - phi(x - ds)) / (2.0 * h);
    const double ge = std::abs(phi(x + de) - phi(x - de)) / (2.0 * h);
    if (gs < kDegeneratePartial && ge < kDegeneratePartial) {
      ++res.excluded;
      continue;
    }
    sum += gs / (gs + ge);
    ++res.used;
  }
  if (res.used == 0) {
    throw Error(ErrorCode::kAllDegenerate, "encoder is flat at every evaluation point");
  }
  res.fidelity = sum / res.used;
  return res;
}

FidelityResult finite_diff_fidelity(const MlpEncoder& model,
                                    const std::vector<Eigen::Vector2d>& points, double h) {
  return finite_diff_fidelity([&](const Eigen::Vector2d& x) { return model.forward(x); }, points,
                              h);
}

std::vector<Eigen::Vector2d> stationary_points(const DynamicsSpec& spec, int count,
                                               std::uint64_t seed) {
  if (spec.n_env() != 1) throw Error(ErrorCode::kInvalidArgument, "stationary_points needs 2D");
  const Eigen::Matrix2d root = sym_psd_sqrt(solve_covariance_closed_form(spec).sigma);
  Rng rng(seed, 0x5354);
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    pts.emplace_back(root * Eigen::Vector2d(a, b));
  }
  return pts;
}

double gradient_check(const MlpEncoder& model, const TransitionSet& data, double eps,
                      std::uint64_t seed) {
  return coordinate_check(
      model, [&](const MlpEncoder& m, Eigen::VectorXd* g) { return mlp_loss(m, data, g); }, eps,
      seed);
}

double gradient_check(const GruPredictor& model, const WindowSet& data, double eps,
                      std::uint64_t seed) {
  return coordinate_check(
      model, [&](const GruPredictor& m, Eigen::VectorXd* g) { return gru_loss(m, data, g); }, eps,
      seed);
}

double gru_directional_check(const GruPredictor& model, const WindowSet& data, double eps,
                             int directions, std::uint64_t seed) {
  const Eigen::VectorXd p0 = model.pack();
  Eigen::VectorXd grad;
  gru_loss(model, data, &grad);
  Rng rng(seed, 0x444952);
  GruPredictor probe = model;
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd d(p0.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.normal();
    d.normalize();
    probe.unpack(p0 + eps * d);
    const double up = gru_loss(probe, data);
    probe.unpack(p0 - eps * d);
    const double down = gru_loss(probe, data);
    worst = std::max(worst, rel_err((up - down) / (2.0 * eps), grad.dot(d)));
  }
  return worst;
}

void to_json(nlohmann::json& j, const TrainedModel& model) {
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return nlohmann::json{{"shape", {m.rows(), m.cols()}}, {"data", rows}};
  };
  nlohmann::json params;
  if (const auto* mlp = std::get_if<MlpEncoder>(&model.params)) {
    params = {{"kind", "mlp"},        {"w1", mat(mlp->w1)}, {"b1", mat(mlp->b1)},
              {"w2", mat(mlp->w2)},   {"b2", mlp->b2},      {"alpha", mlp->alpha}};
  } else {
    const auto& gru = std::get<GruPredictor>(model.params);
    params = {{"kind", "gru"},          {"mode", to_string(gru.mode)},
              {"gate_order", "r,z,n"},  {"wx", mat(gru.wx)},
              {"wh", mat(gru.wh)},      {"b", mat(gru.b)},
              {"wo", mat(gru.wo)},      {"bo", mat(gru.bo)}};
  }
  j = {{"params", params},
       {"best_validation_loss", model.best_validation_loss},
       {"best_epoch", model.best_epoch},
       {"initial_train_loss", model.initial_train_loss},
       {"seed", model.seed},
       {"config", model.config}};
}

std::string loss_trace_csv(const TrainedModel& model) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss\n";
  for (const EpochLoss& e : model.loss_trace) {
    os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
  }
  return os.str();
}

}  // namespace pcgap
