#include "pcgap/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include "pcgap/duffing.hpp"
#include "pcgap/encoder_opt.hpp"
#include "pcgap/error.hpp"
#include "pcgap/gap_analysis.hpp"
#include "pcgap/neural.hpp"
#include "pcgap/parallel.hpp"
#include "pcgap/risk.hpp"
#include "pcgap/rng.hpp"
#include "pcgap/stats.hpp"

#ifndef PCGAP_VERSION_STRING
#define PCGAP_VERSION_STRING "0.0.0"
#endif

namespace pcgap {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config plumbing

const std::vector<double> kNnAs{0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9};
const std::vector<double> kNnAe{0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98};
const std::vector<double> kNnC{-0.95, -0.8, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.8, 0.95};
const std::vector<double> kNnEps{0.05, 0.2, 0.5, 1.0, 2.0};
const std::vector<double> kHighdimC{-0.95, -0.50, -0.10, 0.10, 0.50, 0.95};

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, what);
}

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

/// Seed for one task: base seed mixed with every numeric config value.
std::uint64_t task_seed(std::uint64_t seed, const ConfigTuple& config) {
  std::uint64_t s = seed;
  for (const auto& [key, value] : config.items()) {
    if (value.is_number()) s = derive_seed(s, {bits(value.get<double>())});
  }
  return s;
}

double num(const ConfigTuple& c, const char* key) { return c.at(key).get<double>(); }

ParamPoint point_of(const ConfigTuple& c) {
  return {num(c, "a_s"), num(c, "c"), num(c, "a_e"), num(c, "q_s"), num(c, "q_e")};
}

GridBlock block_from_string(const std::string& s) {
  for (GridBlock b : {GridBlock::kDiagonal, GridBlock::kNegativeCoupling,
                      GridBlock::kPositiveCoupling}) {
    if (to_string(b) == s) return b;
  }
  bad_config("unknown grid block '" + s + "'");
}

ConfigTuple grid_tuple(const GridConfig& g) {
  ConfigTuple t;
  t["block"] = to_string(g.block);
  t["a_s"] = g.params.a_s;
  t["a_e"] = g.params.a_e;
  t["c"] = g.params.c;
  t["q_s"] = g.params.q_s;
  t["q_e"] = g.params.q_e;
  return t;
}

// ---------------------------------------------------------------------------
// Tasks

void verify_metrics(const SweepConfig& cfg, const ConfigTuple& c, std::uint64_t seed,
                    ojson& m) {
  const SweepOptions& o = cfg.options;
  const ParamPoint p = point_of(c);
  const VerificationReport rep = verify_counterexample(p, o.profile_points);
  const DynamicsSpec spec = p.to_spec();
  const RiskLandscape land(spec, rep.sigma);
  const Eigen::MatrixXd& s = rep.sigma.sigma;
  m["sigma11"] = s(0, 0);
  m["sigma12"] = s(0, 1);
  m["sigma22"] = s(1, 1);
  m["r_nz"] = rep.r_nz;
  m["r_env"] = rep.r_env;
  m["r_star"] = rep.r_star;
  m["theta_star_deg"] = rep.theta_star_deg;
  m["ratio"] = rep.ratio;
  m["delta"] = rep.delta;
  m["nz_suboptimal"] = rep.nz_suboptimal;
  m["interior_optimum"] = rep.interior_optimum;

  const RiskProfile sys = angular_profile(land, RiskVariant::kSystem, 0.0, o.profile_points);
  const double rsys_nz = land.value(Encoder::system_axis(2).w(), RiskVariant::kSystem);
  m["rsys_nz"] = rsys_nz;
  m["rsys_min"] = sys.refined_value;
  m["rsys_theta_deg"] = axis_deviation_deg(sys.refined_theta);
  m["rsys_ratio"] = rsys_nz / sys.refined_value;

  const BayesSolution bayes = bayes_optimal(spec, rep.sigma);
  m["bayes_w_s"] = bayes.encoder.w()(0);
  m["bayes_w_e"] = bayes.encoder.w()(1);
  m["bayes_risk"] = land.value(bayes.encoder.w(), RiskVariant::kLatent);
  m["bayes_eigen_residual"] = bayes.eigen_residual;

  const RobustnessResult rob =
      measure_robustness(p, o.robustness_radius, o.robustness_samples, task_seed(seed, c));
  m["robust_fraction"] = rob.fraction;
  m["robust_rejected"] = rob.rejected;
  m["compression_deg"] = compression_direction_deg(p);
}

void grid_metrics(const ConfigTuple& c, ojson& m) {
  GridConfig g{point_of(c), block_from_string(c.at("block").get<std::string>())};
  const GridRow row = linear_grid_sweep(std::vector<GridConfig>{g}, 1).rows.front();
  m["r_nz"] = row.report.r_nz;
  m["r_env"] = row.report.r_env;
  m["r_star"] = row.report.r_star;
  m["theta_star_deg"] = row.report.theta_star_deg;
  m["delta"] = row.report.delta;
  m["fidelity"] = row.fidelity;
  m["nz_optimal"] = row.nz_optimal;
}

void ib_metrics(const ConfigTuple& c, ojson& m) {
  const IbPoint pt = ib_sweep(point_of(c), {num(c, "beta")}).front();
  m["theta_star_deg"] = pt.theta_star_deg;
  m["ib_value"] = pt.ib_value;
}

void bifurcation_metrics(const SweepConfig& cfg, const ConfigTuple& c, ojson& m) {
  ParamPoint base{num(c, "a_s"), 0.0, num(c, "a_e"), num(c, "q_s"), num(c, "q_e")};
  const BifurcationResult r =
      find_bifurcation(base, cfg.options.c_lo, cfg.options.c_hi, cfg.options.bifurcation_grid);
  m["c_star"] = r.c_star;
  m["bracket_lo"] = r.bracket.first;
  m["bracket_hi"] = r.bracket.second;
  m["bracket_width"] = r.bracket.second - r.bracket.first;
  m["d2_at_c_lo"] = r.second_derivative_at_zero.front().second;
  m["d2_at_c_hi"] = r.second_derivative_at_zero.back().second;
  m["theta_star_c_lo"] = r.theta_star_path.front().second;
  m["theta_star_c_hi"] = r.theta_star_path.back().second;
  ojson path = ojson::array();
  for (std::size_t i = 0; i < r.theta_star_path.size(); ++i) {
    path.push_back({r.theta_star_path[i].first, r.second_derivative_at_zero[i].second,
                    r.theta_star_path[i].second});
  }
  m["path"] = path;
}

void highdim_metrics(const SweepConfig& cfg, const ConfigTuple& c, std::uint64_t seed,
                     ojson& m) {
  const int n = static_cast<int>(num(c, "n_env"));
  const DynamicsSpec spec =
      build_highdim_spec(n, num(c, "a_s"), num(c, "q_s"), num(c, "c"), num(c, "q_e"));
  spec.validate();
  const CovarianceSolution cov = solve_covariance_general(spec);
  const RiskLandscape land(spec, cov);
  SphereOptions opts;
  opts.restarts = cfg.options.restarts;
  opts.seed = task_seed(seed, c);
  opts.threads = 1;
  const EncoderSolution sol = minimize_sphere(land, RiskVariant::kLatent, 0.0, opts);
  const double r_nz = land.value(Encoder::system_axis(spec.dim()).w(), RiskVariant::kLatent);
  m["r_nz"] = r_nz;
  m["r_star"] = sol.risk.value;
  m["gap"] = r_nz - sol.risk.value;
  m["improvement_pct"] = 100.0 * (r_nz - sol.risk.value) / r_nz;
  m["fidelity"] = sol.fidelity;
  m["converged_fraction"] = sol.converged_fraction;
  m["lyapunov_residual"] = cov.residual_norm;
}

void nn_metrics(const SweepConfig& cfg, const ConfigTuple& c, std::uint64_t seed, ojson& m) {
  const SweepOptions& o = cfg.options;
  const DynamicsSpec spec = DynamicsSpec::two_dim(num(c, "a_s"), num(c, "a_e"), num(c, "c"),
                                                  num(c, "q_s"), num(c, "q_e"));
  spec.validate();
  const std::uint64_t task = task_seed(seed, c);
  const TrajectoryBatch batch =
      sample_trajectories(spec, o.nn_trajectories, o.nn_length, derive_seed(task, {0}));
  TrainConfig tc;
  tc.learning_rate = o.nn_learning_rate;
  tc.epochs = o.nn_epochs;
  tc.seed = derive_seed(task, {1});
  const TrainedModel model = train_mlp_encoder(batch, tc);
  const FidelityResult fid = finite_diff_fidelity(
      model.mlp(), stationary_points(spec, o.fidelity_points, derive_seed(task, {2})),
      o.fidelity_step);
  const VerificationReport lin = verify_counterexample(point_of(c), o.profile_points);
  m["val_risk"] = model.best_validation_loss;
  m["r_star_lin"] = lin.r_star;
  m["r_nz"] = lin.r_nz;
  m["risk_ratio"] = model.best_validation_loss / lin.r_star;
  m["fidelity"] = fid.fidelity;
  m["degenerate_points"] = fid.excluded;
  m["best_epoch"] = model.best_epoch;
  m["alpha"] = model.mlp().alpha;
}

// ---------------------------------------------------------------------------
// CSV

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::string cell(const ojson& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return csv_escape(v.get<std::string>());
  return v.dump();
}

std::string csv_header(Tier t) {
  std::string line;
  for (const auto& col : record_columns(t)) {
    if (!line.empty()) line += ',';
    line += col;
  }
  return line + '\n';
}

std::string csv_row(const SweepRecord& r) {
  std::string line;
  bool first = true;
  for (const auto& col : record_columns(r.tier)) {
    if (!first) line += ',';
    first = false;
    if (col == "seed") {
      line += std::to_string(r.seed);
    } else if (col == "status") {
      line += csv_escape(r.status());
    } else if (r.config.contains(col)) {
      line += cell(r.config[col]);
    } else if (r.metrics.contains(col)) {
      line += cell(r.metrics[col]);
    }
  }
  return line + '\n';
}

/// Emits records strictly in task order so file contents do not depend on
/// which worker finishes first.
class OrderedWriter {
 public:
  OrderedWriter(const fs::path& csv, const fs::path& jsonl, bool fresh, const std::string& header,
                Tier tier) {
    const auto mode = fresh ? std::ios::trunc : std::ios::app;
    csv_.open(csv, std::ios::out | mode);
    jsonl_.open(jsonl, std::ios::out | mode);
    if (!csv_ || !jsonl_) throw Error(ErrorCode::kIoError, "cannot open record files");
    if (fresh) {
      csv_ << header << '\n' << csv_header(tier);
      jsonl_ << header << '\n';
      flush();
    }
  }

  void submit(std::size_t index, SweepRecord rec) {
    std::lock_guard lock(mutex_);
    pending_.emplace(index, std::move(rec));
    while (!pending_.empty() && pending_.begin()->first == next_) {
      const SweepRecord& r = pending_.begin()->second;
      csv_ << csv_row(r);
      jsonl_ << ojson(r).dump() << '\n';
      flush();
      pending_.erase(pending_.begin());
      ++next_;
    }
  }

 private:
  void flush() {
    csv_.flush();
    jsonl_.flush();
    if (!csv_ || !jsonl_) throw Error(ErrorCode::kIoError, "write to record files failed");
  }

  std::mutex mutex_;
  std::map<std::size_t, SweepRecord> pending_;
  std::size_t next_ = 0;
  std::ofstream csv_;
  std::ofstream jsonl_;
};

void write_text(const fs::path& path, const std::string& header, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << header << '\n' << body;
}

void write_json(const fs::path& path, const SweepConfig& cfg, const ojson& body) {
  ojson doc;
  doc["header"] = {{"tool_version", tool_version()}, {"config_hash", config_hash(cfg)}};
  for (const auto& [k, v] : body.items()) doc[k] = v;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Aggregation helpers

std::vector<const SweepRecord*> ok_records(const std::vector<SweepRecord>& records) {
  std::vector<const SweepRecord*> out;
  for (const auto& r : records) {
    if (r.ok()) out.push_back(&r);
  }
  return out;
}

ojson summary_json(const stats::Summary& s) {
  ojson j;
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["std_dev"] = s.std_dev;
  j["q1"] = s.q1;
  j["q3"] = s.q3;
  j["min"] = s.min;
  j["max"] = s.max;
  for (const auto& [t, f] : s.frac_above) j["frac_above_" + ojson(t).dump()] = f;
  for (const auto& [t, f] : s.frac_below) j["frac_below_" + ojson(t).dump()] = f;
  return j;
}

ojson stat_json(const stats::StatResult& r) {
  ojson j;
  j["estimate"] = r.estimate;
  if (r.ci_low) j["ci_low"] = *r.ci_low;
  if (r.ci_high) j["ci_high"] = *r.ci_high;
  if (r.p_value) j["p_value"] = *r.p_value;
  j["method"] = stats::to_string(r.method);
  return j;
}

double metric(const SweepRecord& r, const char* key) { return r.metrics.at(key).get<double>(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

ojson summarize_grid(const std::vector<const SweepRecord*>& ok) {
  ojson j;
  int n_diag = 0, n_coupled = 0, nz_diag = 0, nz_coupled = 0, coupled_below_one = 0;
  std::vector<double> diag_fid, coupled_fid;
  for (const auto* r : ok) {
    const bool diag = r->config.at("block") == "diagonal";
    const bool nz = r->metrics.at("nz_optimal").get<bool>();
    const double f = metric(*r, "fidelity");
    if (diag) {
      ++n_diag;
      nz_diag += nz;
      diag_fid.push_back(f);
    } else {
      ++n_coupled;
      nz_coupled += nz;
      coupled_below_one += f < 1.0;
      coupled_fid.push_back(f);
    }
  }
  j["n_configs"] = n_diag + n_coupled;
  j["n_diagonal"] = n_diag;
  j["n_coupled"] = n_coupled;
  j["n_nz_optimal"] = nz_diag + nz_coupled;
  j["n_nz_optimal_diagonal"] = nz_diag;
  j["n_nz_optimal_coupled"] = nz_coupled;
  j["n_coupled_fidelity_below_one"] = coupled_below_one;
  j["frac_suboptimal"] =
      ok.empty() ? 0.0 : 1.0 - static_cast<double>(nz_diag + nz_coupled) / ok.size();
  if (!diag_fid.empty()) j["fidelity_diagonal"] = summary_json(stats::summarize(diag_fid));
  if (!coupled_fid.empty()) j["fidelity_coupled"] = summary_json(stats::summarize(coupled_fid));
  return j;
}

ojson summarize_ib(const std::vector<const SweepRecord*>& ok) {
  std::map<double, ojson> per_beta;
  for (const auto* r : ok) {
    const double beta = num(r->config, "beta");
    ojson& b = per_beta[beta];
    if (b.is_null()) {
      b["beta"] = beta;
      b["n_coupled"] = 0;
      b["n_coupled_within_0_1_deg"] = 0;
      b["min_theta_star_coupled_deg"] = nullptr;
    }
    const double theta = metric(*r, "theta_star_deg");
    const std::string set = r->config.at("set").get<std::string>();
    if (set == "reference") {
      b["reference_theta_star_deg"] = theta;
    } else if (num(r->config, "c") != 0.0) {
      b["n_coupled"] = b["n_coupled"].get<int>() + 1;
      if (theta < 0.1) b["n_coupled_within_0_1_deg"] = b["n_coupled_within_0_1_deg"].get<int>() + 1;
      auto& mn = b["min_theta_star_coupled_deg"];
      if (mn.is_null() || theta < mn.get<double>()) mn = theta;
    }
  }
  ojson j;
  std::set<std::string> grid_configs;
  for (const auto* r : ok) {
    if (r->config.at("set") == "grid") {
      ojson c = r->config;
      c.erase("beta");
      grid_configs.insert(c.dump());
    }
  }
  j["n_grid_configs_swept"] = grid_configs.size();
  // The stated sweep size for this experiment (100) differs from the grid
  // size (160); both are reported.
  j["stated_sweep_size"] = 100;
  ojson rows = ojson::array();
  for (auto& [beta, b] : per_beta) rows.push_back(b);
  j["per_beta"] = rows;
  return j;
}

ojson summarize_highdim(const std::vector<const SweepRecord*>& ok) {
  std::map<int, std::vector<const SweepRecord*>> by_n;
  for (const auto* r : ok) by_n[static_cast<int>(num(r->config, "n_env"))].push_back(r);
  ojson rows = ojson::array();
  for (const auto& [n, recs] : by_n) {
    std::vector<double> gap, imp, fid, rnz, rstar;
    for (const auto* r : recs) {
      gap.push_back(metric(*r, "gap"));
      imp.push_back(metric(*r, "improvement_pct"));
      fid.push_back(metric(*r, "fidelity"));
      rnz.push_back(metric(*r, "r_nz"));
      rstar.push_back(metric(*r, "r_star"));
    }
    const auto g = stats::summarize(gap);
    ojson row;
    row["n_env"] = n;
    row["n_configs"] = recs.size();
    row["gap_mean"] = g.mean;
    row["gap_sd"] = g.std_dev;
    row["improvement_pct_mean"] = stats::summarize(imp).mean;
    row["fidelity_mean"] = stats::summarize(fid).mean;
    row["fidelity_max"] = stats::summarize(fid).max;
    row["r_nz_mean"] = stats::summarize(rnz).mean;
    row["r_star_mean"] = stats::summarize(rstar).mean;
    rows.push_back(row);
  }
  return ojson{{"per_n", rows}};
}

ojson summarize_nn(const std::vector<const SweepRecord*>& ok) {
  ojson j;
  std::vector<double> fid;
  int below_linear = 0, degenerate = 0;
  double ratio_sum = 0.0;
  std::map<std::string, std::vector<double>> per_config;
  std::map<std::string, ojson> config_of;
  for (const auto* r : ok) {
    const double f = metric(*r, "fidelity");
    fid.push_back(f);
    below_linear += metric(*r, "val_risk") < metric(*r, "r_star_lin");
    ratio_sum += metric(*r, "risk_ratio");
    degenerate += r->metrics.at("degenerate_points").get<int>();
    per_config[r->config.dump()].push_back(f);
    config_of[r->config.dump()] = r->config;
  }
  j["n_runs"] = ok.size();
  if (!ok.empty()) {
    j["fidelity"] =
        summary_json(stats::summarize(fid, {0.9, 0.8, 0.7}, {0.5, 0.3}));
    j["frac_nn_below_linear"] = static_cast<double>(below_linear) / ok.size();
    j["mean_risk_ratio"] = ratio_sum / ok.size();
    j["degenerate_points_total"] = degenerate;
  }
  std::vector<std::pair<double, ojson>> ranked;
  for (const auto& [key, v] : per_config) {
    const auto s = stats::summarize(v);
    ojson row = config_of[key];
    row["mean_fidelity"] = s.mean;
    row["std_fidelity"] = s.std_dev;
    row["n_seeds"] = v.size();
    ranked.emplace_back(s.mean, row);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  ojson best = ojson::array(), worst = ojson::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
    best.push_back(ranked[i].second);
    worst.push_back(ranked[ranked.size() - 1 - i].second);
  }
  j["highest_fidelity"] = best;
  j["lowest_fidelity"] = worst;
  return j;
}

ojson summarize_duffing(const std::vector<const SweepRecord*>& ok) {
  ojson j;
  struct Mode {
    long n = 0, dom = 0, dom_105 = 0;
    std::vector<double> inflation;
  };
  Mode modes[2];  // 0 unconstrained, 1 grounded
  for (const auto* r : ok) {
    Mode& m = modes[r->config.at("grounded").get<double>() != 0.0 ? 1 : 0];
    ++m.n;
    m.dom += r->metrics.at("env_dominant").get<bool>();
    m.dom_105 += metric(*r, "ratio") > 1.05;
    m.inflation.push_back(metric(*r, "inflation"));
  }
  const char* names[2] = {"unconstrained", "grounded"};
  for (int k = 0; k < 2; ++k) {
    const Mode& m = modes[k];
    ojson mj;
    mj["n"] = m.n;
    mj["n_env_dominant"] = m.dom;
    mj["n_env_dominant_threshold_1_05"] = m.dom_105;
    if (m.n > 0) {
      mj["dominance"] = stat_json(stats::wilson_ci(m.dom, m.n));
      mj["inflation"] = summary_json(stats::summarize(m.inflation));
    }
    j[names[k]] = mj;
  }
  if (modes[0].n > 0 && modes[1].n > 0) {
    j["fisher_dominance"] = stat_json(stats::fisher_exact(
        modes[0].dom, modes[0].n - modes[0].dom, modes[1].dom, modes[1].n - modes[1].dom));
    j["mann_whitney_inflation"] =
        stat_json(stats::mann_whitney_u(modes[0].inflation, modes[1].inflation).as_stat_result());
  }
  return j;
}

ojson first_ok_metrics(const std::vector<const SweepRecord*>& ok) {
  ojson rows = ojson::array();
  for (const auto* r : ok) {
    ojson row = r->config;
    for (const auto& [k, v] : r->metrics.items()) {
      if (k != "path") row[k] = v;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Plot data

std::map<std::string, std::string> plot_files(Tier tier, const std::vector<SweepRecord>& recs) {
  std::map<std::string, std::string> files;
  const auto ok = ok_records(recs);
  std::ostringstream os;
  os.precision(10);
  switch (tier) {
    case Tier::kLinearGrid: {
      os << "index,block,a_s,a_e,c,theta_star_deg,fidelity\n";
      int i = 0;
      for (const auto* r : ok) {
        os << i++ << ',' << r->config.at("block").get<std::string>() << ',' << num(r->config, "a_s")
           << ',' << num(r->config, "a_e") << ',' << num(r->config, "c") << ','
           << metric(*r, "theta_star_deg") << ',' << metric(*r, "fidelity") << '\n';
      }
      files["fig1_fidelity_vs_config.csv"] = os.str();
      break;
    }
    case Tier::kNnSweep: {
      std::map<std::pair<double, double>, std::vector<double>> cells;
      for (const auto* r : ok) {
        if (std::abs(num(r->config, "c") + 0.5) < 1e-12 &&
            std::abs(num(r->config, "eps") - 0.05) < 1e-12) {
          cells[{num(r->config, "a_s"), num(r->config, "a_e")}].push_back(metric(*r, "fidelity"));
        }
      }
      os << "a_s,a_e,mean_fidelity,n\n";
      for (const auto& [k, v] : cells) {
        os << k.first << ',' << k.second << ',' << stats::summarize(v).mean << ',' << v.size()
           << '\n';
      }
      files["fig2_fidelity_heatmap_c-0.50_eps0.05.csv"] = os.str();
      break;
    }
    case Tier::kHighdim: {
      os << "n_env,gap_mean,gap_sd,fidelity_mean,improvement_pct_mean\n";
      for (const auto& row : summarize_highdim(ok)["per_n"]) {
        os << row["n_env"].get<int>() << ',' << row["gap_mean"].get<double>() << ','
           << row["gap_sd"].get<double>() << ',' << row["fidelity_mean"].get<double>() << ','
           << row["improvement_pct_mean"].get<double>() << '\n';
      }
      files["fig3_gap_fidelity_vs_n.csv"] = os.str();
      break;
    }
    case Tier::kDuffing: {
      std::map<std::tuple<int, double, double>, std::pair<int, int>> cells;
      std::ostringstream scatter;
      scatter.precision(10);
      scatter << "mode,alpha_e,gamma_se,seed,mse_id,mse_ood,inflation\n";
      for (const auto* r : ok) {
        const int g = r->config.at("grounded").get<double>() != 0.0;
        auto& c = cells[{g, num(r->config, "alpha_e"), num(r->config, "gamma_se")}];
        c.first += r->metrics.at("env_dominant").get<bool>();
        ++c.second;
        scatter << (g ? "grounded" : "unconstrained") << ',' << num(r->config, "alpha_e") << ','
                << num(r->config, "gamma_se") << ',' << r->seed << ',' << metric(*r, "mse_id")
                << ',' << metric(*r, "mse_ood") << ',' << metric(*r, "inflation") << '\n';
      }
      os << "mode,alpha_e,gamma_se,frac_env_dominant,n\n";
      for (const auto& [k, v] : cells) {
        os << (std::get<0>(k) ? "grounded" : "unconstrained") << ',' << std::get<1>(k) << ','
           << std::get<2>(k) << ',' << static_cast<double>(v.first) / v.second << ',' << v.second
           << '\n';
      }
      files["fig4_dominance_heatmap.csv"] = os.str();
      const ojson s = summarize_duffing(ok);
      std::ostringstream ci;
      ci.precision(10);
      ci << "mode,fraction,ci_low,ci_high,n\n";
      for (const char* mode : {"unconstrained", "grounded"}) {
        if (!s[mode].contains("dominance")) continue;
        const auto& d = s[mode]["dominance"];
        ci << mode << ',' << d["estimate"].get<double>() << ',' << d["ci_low"].get<double>() << ','
           << d["ci_high"].get<double>() << ',' << s[mode]["n"].get<long>() << '\n';
      }
      files["fig5_dominance_ci.csv"] = ci.str();
      files["fig5_ood_scatter.csv"] = scatter.str();
      break;
    }
    case Tier::kBifurcation: {
      os << "c,d2r_dtheta2_at_0,theta_star_deg\n";
      for (const auto* r : ok) {
        for (const auto& p : r->metrics.at("path")) {
          os << p[0].get<double>() << ',' << p[1].get<double>() << ',' << p[2].get<double>()
             << '\n';
        }
      }
      files["bifurcation_path.csv"] = os.str();
      break;
    }
    case Tier::kIb: {
      os << "set,block,a_s,a_e,c,beta,theta_star_deg\n";
      for (const auto* r : ok) {
        os << r->config.at("set").get<std::string>() << ','
           << r->config.at("block").get<std::string>() << ',' << num(r->config, "a_s") << ','
           << num(r->config, "a_e") << ',' << num(r->config, "c") << ','
           << num(r->config, "beta") << ',' << metric(*r, "theta_star_deg") << '\n';
      }
      files["ib_theta_vs_beta.csv"] = os.str();
      break;
    }
    case Tier::kVerify:
      break;
  }
  return files;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::string_view to_string(Scale s) { return s == Scale::kDesk ? "desk" : "full"; }

Scale scale_from_string(std::string_view s) {
  if (s == "desk") return Scale::kDesk;
  if (s == "full") return Scale::kFull;
  bad_config("unknown scale '" + std::string(s) + "'");
}

std::string tool_version() { return PCGAP_VERSION_STRING; }

const std::vector<std::string>& tier_axes(Tier t) {
  static const std::map<Tier, std::vector<std::string>> axes{
      {Tier::kLinearGrid, {}},
      {Tier::kNnSweep, {"a_s", "a_e", "c", "eps"}},
      {Tier::kHighdim, {"n_env", "c", "q_s"}},
      {Tier::kDuffing, {"alpha_e", "gamma_se", "grounded"}},
      {Tier::kVerify, {"a_s", "c", "a_e", "q_s", "q_e"}},
      {Tier::kBifurcation, {"a_s", "a_e", "q_s", "q_e"}},
      {Tier::kIb, {"beta"}},
  };
  return axes.at(t);
}

SweepConfig default_config(Tier t, Scale s) {
  SweepConfig cfg;
  cfg.tier = t;
  cfg.scale = s;
  cfg.output_dir = "results/" + std::string(to_string(t));
  const bool full = s == Scale::kFull;
  const ParamPoint& ref = kReferencePoint;
  switch (t) {
    case Tier::kLinearGrid:
      break;
    case Tier::kNnSweep:
      cfg.grids = {{"a_s", kNnAs}, {"a_e", kNnAe}, {"c", kNnC}, {"eps", kNnEps}};
      cfg.seeds = full ? std::vector<std::uint64_t>{0, 1, 2, 3, 4}
                       : std::vector<std::uint64_t>{0, 1};
      if (full) {
        cfg.options.nn_epochs = 2000;
        cfg.options.nn_trajectories = 5000;
        cfg.options.nn_config_limit = 0;
      }
      break;
    case Tier::kHighdim:
      cfg.grids = {{"n_env", full ? std::vector<double>{10, 50, 100} : std::vector<double>{10, 50}},
                   {"c", kHighdimC},
                   {"q_s", {0.01, 0.05}}};
      cfg.options.restarts = full ? 500 : 50;
      break;
    case Tier::kDuffing:
      if (full) {
        cfg.grids = {{"alpha_e", {0.01, 0.03, 0.1, 0.3}},
                     {"gamma_se", {0.1, 0.5, 1.0, 2.0, 5.0}},
                     {"grounded", {0, 1}}};
        cfg.seeds = {0, 1, 2};
      } else {
        cfg.grids = {{"alpha_e", {0.01, 0.03}}, {"gamma_se", {1.0, 2.0}}, {"grounded", {0, 1}}};
        cfg.seeds = {0, 1};
      }
      break;
    case Tier::kVerify:
      cfg.grids = {{"a_s", {ref.a_s}}, {"c", {ref.c}}, {"a_e", {ref.a_e}},
                   {"q_s", {ref.q_s}}, {"q_e", {ref.q_e}}};
      break;
    case Tier::kBifurcation:
      cfg.grids = {{"a_s", {ref.a_s}}, {"a_e", {ref.a_e}}, {"q_s", {ref.q_s}}, {"q_e", {ref.q_e}}};
      break;
    case Tier::kIb:
      cfg.grids = {{"beta", kIbBetaGrid}};
      break;
  }
  return cfg;
}

void SweepConfig::validate() const {
  const auto& axes = tier_axes(tier);
  for (const auto& [name, values] : grids) {
    if (std::find(axes.begin(), axes.end(), name) == axes.end()) {
      bad_config("axis '" + name + "' does not belong to tier " + std::string(to_string(tier)));
    }
    for (double v : values) {
      if (!std::isfinite(v)) bad_config("axis '" + name + "' has a non-finite value");
    }
  }
  for (const auto& a : axes) {
    if (!grids.contains(a)) bad_config("missing axis '" + a + "'");
  }
  if (seeds.empty()) bad_config("seed list is empty");
  if (parallelism < 0) bad_config("parallelism must be >= 0");
  const SweepOptions& o = options;
  if (o.nn_epochs <= 0 || o.nn_trajectories < 2 || o.nn_length < 2 || o.nn_config_limit < 0 ||
      o.fidelity_points <= 0 || !(o.fidelity_step > 0) || !(o.q_e > 0) ||
      !(o.nn_learning_rate > 0) || o.restarts <= 0 || o.duffing_epochs <= 0 ||
      o.duffing_train_trajectories < 2 || o.duffing_length < 2 ||
      o.duffing_test_trajectories < 10 || o.bifurcation_grid < 16 || o.profile_points < 3 ||
      !(o.robustness_radius > 0) || o.robustness_samples <= 0 || !(o.c_lo < o.c_hi)) {
    bad_config("option out of range");
  }
  if (tier == Tier::kHighdim) {
    for (double n : grids.at("n_env")) {
      if (n < 1 || n != std::floor(n)) bad_config("n_env values must be positive integers");
    }
  }
}

#define PCGAP_OPTION_FIELDS(X)                                                             \
  X(nn_epochs) X(nn_trajectories) X(nn_length) X(nn_learning_rate) X(nn_config_limit)      \
  X(fidelity_points) X(fidelity_step) X(q_e) X(restarts) X(highdim_a_s) X(duffing_epochs)  \
  X(duffing_train_trajectories) X(duffing_length) X(duffing_test_trajectories)             \
  X(dominance_threshold) X(ood_alpha_factor) X(ood_sigma_factor) X(c_lo) X(c_hi)           \
  X(bifurcation_grid) X(profile_points) X(robustness_radius) X(robustness_samples)

void to_json(ojson& j, const SweepConfig& cfg) {
  j = ojson::object();
  j["tier"] = to_string(cfg.tier);
  j["scale"] = to_string(cfg.scale);
  ojson grids = ojson::object();
  for (const auto& axis : tier_axes(cfg.tier)) {
    if (cfg.grids.contains(axis)) grids[axis] = cfg.grids.at(axis);
  }
  j["grids"] = grids;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["parallelism"] = cfg.parallelism;
  ojson opts = ojson::object();
#define X(name) opts[#name] = cfg.options.name;
  PCGAP_OPTION_FIELDS(X)
#undef X
  j["options"] = opts;
}

SweepConfig sweep_config_from_json(const ojson& j) {
  try {
    if (!j.is_object()) bad_config("config must be a JSON object");
    static const std::set<std::string> known{"tier",   "scale",       "grids",      "seeds",
                                             "output_dir", "parallelism", "options"};
    for (const auto& [k, v] : j.items()) {
      if (!known.contains(k)) bad_config("unknown config key '" + k + "'");
    }
    const Tier tier = tier_from_string(j.at("tier").get<std::string>());
    const Scale scale = scale_from_string(j.value("scale", std::string("desk")));
    SweepConfig cfg = default_config(tier, scale);
    if (j.contains("grids")) {
      for (const auto& [k, v] : j.at("grids").items()) cfg.grids[k] = v.get<std::vector<double>>();
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
    if (j.contains("options")) {
      std::set<std::string> seen;
      const ojson& o = j.at("options");
#define X(name)                                                         \
  if (o.contains(#name)) {                                              \
    cfg.options.name = o.at(#name).get<decltype(cfg.options.name)>();   \
    seen.insert(#name);                                                 \
  }
      PCGAP_OPTION_FIELDS(X)
#undef X
      for (const auto& [k, v] : o.items()) {
        if (!seen.contains(k)) bad_config("unknown option '" + k + "'");
      }
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& ex) {
    bad_config(std::string("malformed config: ") + ex.what());
  }
}

SweepConfig load_sweep_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) bad_config("cannot read config file " + path.string());
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    bad_config("config file is not valid JSON: " + std::string(ex.what()));
  }
  return sweep_config_from_json(j);
}

std::string config_hash(const SweepConfig& cfg) {
  ojson j = cfg;
  j.erase("output_dir");
  j.erase("parallelism");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string header_line(const SweepConfig& cfg) {
  return "# pcgap " + tool_version() + " config_hash=" + config_hash(cfg);
}

// ---------------------------------------------------------------------------
// Enumeration

std::size_t nominal_config_count(const SweepConfig& cfg) {
  if (cfg.tier == Tier::kLinearGrid) return linear_grid_configs().size();
  std::size_t n = 1;
  for (const auto& axis : tier_axes(cfg.tier)) n *= cfg.grids.at(axis).size();
  if (cfg.tier == Tier::kIb) n *= 1 + linear_grid_configs().size();
  return n;
}

std::vector<ConfigTuple> enumerate_configs(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<ConfigTuple> out;
  if (cfg.tier == Tier::kLinearGrid) {
    for (const auto& g : linear_grid_configs()) out.push_back(grid_tuple(g));
    return out;
  }
  const auto& axes = tier_axes(cfg.tier);
  std::vector<ConfigTuple> product{ConfigTuple::object()};
  for (const auto& axis : axes) {
    std::vector<ConfigTuple> next;
    for (const auto& partial : product) {
      for (double v : cfg.grids.at(axis)) {
        ConfigTuple t = partial;
        t[axis] = v;
        next.push_back(std::move(t));
      }
    }
    product = std::move(next);
  }

  switch (cfg.tier) {
    case Tier::kNnSweep: {
      for (auto& t : product) {
        const double a_s = num(t, "a_s"), a_e = num(t, "a_e"), c = num(t, "c");
        if (!(std::abs(c) < 1.0 - std::max(std::abs(a_s), std::abs(a_e)))) continue;
        t["q_s"] = num(t, "eps") * cfg.options.q_e;
        t["q_e"] = cfg.options.q_e;
        out.push_back(std::move(t));
      }
      const auto limit = static_cast<std::size_t>(cfg.options.nn_config_limit);
      if (limit > 0 && limit < out.size()) {
        // Evenly spaced picks through the lexicographic order cover every
        // leading axis value.
        std::vector<ConfigTuple> picked;
        for (std::size_t i = 0; i < limit; ++i) {
          picked.push_back(out[(2 * i + 1) * out.size() / (2 * limit)]);
        }
        out = std::move(picked);
      }
      break;
    }
    case Tier::kHighdim:
      for (auto& t : product) {
        t["a_s"] = cfg.options.highdim_a_s;
        t["q_e"] = cfg.options.q_e;
        out.push_back(std::move(t));
      }
      break;
    case Tier::kIb: {
      std::vector<ConfigTuple> sets;
      ConfigTuple ref = ConfigTuple::object();
      ref["set"] = "reference";
      const ConfigTuple ref_vals = grid_tuple({kReferencePoint, GridBlock::kNegativeCoupling});
      for (const auto& [k, v] : ref_vals.items()) ref[k] = v;
      ref["block"] = "reference";
      sets.push_back(ref);
      for (const auto& g : linear_grid_configs()) {
        ConfigTuple t = ConfigTuple::object();
        t["set"] = "grid";
        const ConfigTuple vals = grid_tuple(g);
        for (const auto& [k, v] : vals.items()) t[k] = v;
        sets.push_back(t);
      }
      for (const auto& s : sets) {
        for (const auto& b : product) {
          ConfigTuple t = s;
          t["beta"] = b.at("beta");
          out.push_back(std::move(t));
        }
      }
      break;
    }
    case Tier::kDuffing:
      for (auto& t : product) {
        const double g = num(t, "grounded");
        if (g != 0.0 && g != 1.0) bad_config("grounded axis takes values 0 and 1");
        out.push_back(std::move(t));
      }
      break;
    default:
      out = std::move(product);
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyGrid, "no configuration survives enumeration");
  return out;
}

const std::vector<std::string>& record_columns(Tier t) {
  static const std::map<Tier, std::vector<std::string>> cols{
      {Tier::kLinearGrid,
       {"block", "a_s", "a_e", "c", "q_s", "q_e", "seed", "r_nz", "r_env", "r_star",
        "theta_star_deg", "delta", "fidelity", "nz_optimal", "status"}},
      {Tier::kVerify,
       {"a_s",          "c",        "a_e",          "q_s",           "q_e",
        "seed",         "sigma11",  "sigma12",      "sigma22",       "r_nz",
        "r_env",        "r_star",   "theta_star_deg", "ratio",       "delta",
        "nz_suboptimal", "interior_optimum", "rsys_nz", "rsys_min",  "rsys_theta_deg",
        "rsys_ratio",   "bayes_w_s", "bayes_w_e",   "bayes_risk",    "bayes_eigen_residual",
        "robust_fraction", "robust_rejected", "compression_deg", "status"}},
      {Tier::kBifurcation,
       {"a_s", "a_e", "q_s", "q_e", "seed", "c_star", "bracket_lo", "bracket_hi",
        "bracket_width", "d2_at_c_lo", "d2_at_c_hi", "theta_star_c_lo", "theta_star_c_hi",
        "status"}},
      {Tier::kIb,
       {"set", "block", "a_s", "a_e", "c", "q_s", "q_e", "beta", "seed", "theta_star_deg",
        "ib_value", "status"}},
      {Tier::kHighdim,
       {"n_env", "c", "q_s", "a_s", "q_e", "seed", "r_nz", "r_star", "gap", "improvement_pct",
        "fidelity", "converged_fraction", "lyapunov_residual", "status"}},
      {Tier::kNnSweep,
       {"a_s", "a_e", "c", "eps", "q_s", "q_e", "seed", "val_risk", "r_star_lin", "r_nz",
        "risk_ratio", "fidelity", "degenerate_points", "best_epoch", "alpha", "status"}},
      {Tier::kDuffing, duffing_columns()},
  };
  return cols.at(t);
}

SweepRecord run_task(const SweepConfig& cfg, const ConfigTuple& config, std::uint64_t seed) {
  if (cfg.tier == Tier::kDuffing) {
    DuffingTaskOptions opts;
    opts.train_trajectories = cfg.options.duffing_train_trajectories;
    opts.length = cfg.options.duffing_length;
    opts.test_trajectories = cfg.options.duffing_test_trajectories;
    opts.train.epochs = cfg.options.duffing_epochs;
    opts.dominance_threshold = cfg.options.dominance_threshold;
    opts.shift = {cfg.options.ood_alpha_factor, cfg.options.ood_sigma_factor};
    SweepRecord rec = duffing_task(num(config, "alpha_e"), num(config, "gamma_se"),
                                   num(config, "grounded") != 0.0, seed, opts);
    rec.config = config;
    return rec;
  }
  SweepRecord rec;
  rec.tier = cfg.tier;
  rec.config = config;
  rec.seed = seed;
  try {
    switch (cfg.tier) {
      case Tier::kVerify:
        verify_metrics(cfg, config, seed, rec.metrics);
        break;
      case Tier::kLinearGrid:
        grid_metrics(config, rec.metrics);
        break;
      case Tier::kIb:
        ib_metrics(config, rec.metrics);
        break;
      case Tier::kBifurcation:
        bifurcation_metrics(cfg, config, rec.metrics);
        break;
      case Tier::kHighdim:
        highdim_metrics(cfg, config, seed, rec.metrics);
        break;
      case Tier::kNnSweep:
        nn_metrics(cfg, config, seed, rec.metrics);
        break;
      case Tier::kDuffing:
        break;
    }
  } catch (const std::exception& ex) {
    rec.metrics = ojson::object();
    rec.failure = std::string(to_string(ErrorCode::kTaskFailed)) + ": " + ex.what();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Records

std::vector<SweepRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<SweepRecord> out;
  std::vector<std::size_t> bad;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    try {
      out.push_back(ojson::parse(line).get<SweepRecord>());
    } catch (const std::exception&) {
      bad.push_back(lineno);
    }
  }
  if (!bad.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) {
      lines += (i ? ", " : "") + std::to_string(bad[i]);
    }
    if (bad.size() > 20) lines += ", ...";
    throw Error(ErrorCode::kCorruptRecords, path.string() + ": unreadable record on line(s) " + lines);
  }
  return out;
}

nlohmann::ordered_json summarize_records(Tier tier, const std::vector<SweepRecord>& records) {
  const auto ok = ok_records(records);
  ojson j;
  j["tier"] = to_string(tier);
  j["n_records"] = records.size();
  j["n_ok"] = ok.size();
  j["n_failed"] = records.size() - ok.size();
  ojson failures = ojson::array();
  for (const auto& r : records) {
    if (!r.ok()) failures.push_back({{"config", r.config}, {"seed", r.seed}, {"reason", *r.failure}});
  }
  j["failures"] = failures;
  ojson body;
  switch (tier) {
    case Tier::kLinearGrid:
      body = summarize_grid(ok);
      break;
    case Tier::kIb:
      body = summarize_ib(ok);
      break;
    case Tier::kHighdim:
      body = summarize_highdim(ok);
      break;
    case Tier::kNnSweep:
      body = summarize_nn(ok);
      break;
    case Tier::kDuffing:
      body = summarize_duffing(ok);
      break;
    case Tier::kVerify:
    case Tier::kBifurcation:
      body = ojson{{"results", first_ok_metrics(ok)}};
      break;
  }
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j;
}

SweepOutcome run_sweep(const SweepConfig& cfg) {
  const std::vector<ConfigTuple> configs = enumerate_configs(cfg);
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());

  const std::string tier(to_string(cfg.tier));
  const fs::path jsonl = dir / (tier + ".jsonl");
  const fs::path csv = dir / (tier + ".csv");
  const std::string header = header_line(cfg);

  std::vector<SweepRecord> existing;
  bool fresh = true;
  if (fs::exists(jsonl) && fs::file_size(jsonl) > 0) {
    std::ifstream in(jsonl);
    std::string first;
    std::getline(in, first);
    if (first != header) {
      bad_config(jsonl.string() + " was written under a different configuration (" + first +
                 "); choose another --out");
    }
    existing = read_records(jsonl);
    fresh = false;
  }
  std::set<std::string> done;
  for (const auto& r : existing) done.insert(r.key());

  struct Task {
    const ConfigTuple* config;
    std::uint64_t seed;
  };
  std::vector<Task> pending;
  std::size_t total = 0;
  for (const auto& c : configs) {
    for (std::uint64_t s : cfg.seeds) {
      ++total;
      SweepRecord probe;
      probe.tier = cfg.tier;
      probe.config = c;
      probe.seed = s;
      if (!done.contains(probe.key())) pending.push_back({&c, s});
    }
  }

  std::vector<SweepRecord> fresh_records(pending.size());
  {
    OrderedWriter writer(csv, jsonl, fresh, header, cfg.tier);
    parallel_for(pending.size(), cfg.parallelism, [&](std::size_t i) {
      SweepRecord rec = run_task(cfg, *pending[i].config, pending[i].seed);
      fresh_records[i] = rec;
      writer.submit(i, std::move(rec));
    });
  }

  std::vector<SweepRecord> all = existing;
  all.insert(all.end(), fresh_records.begin(), fresh_records.end());

  SweepOutcome out;
  out.output_dir = dir;
  out.launched = pending.size();
  out.skipped = total - pending.size();
  for (const auto& r : all) (r.ok() ? out.ok : out.failed) += 1;
  out.summary = summarize_records(cfg.tier, all);
  out.summary["nominal_configs"] = nominal_config_count(cfg);
  out.summary["enumerated_configs"] = configs.size();

  write_json(dir / "effective_config.json", cfg, ojson{{"config", ojson(cfg)}});
  write_json(dir / "summary.json", cfg, out.summary);
  for (const auto& [name, body] : plot_files(cfg.tier, all)) {
    write_text(dir / name, header, body);
  }
  write_text(dir / "summary.txt", header, summary_text(cfg.tier, out.summary));
  return out;
}

Report report(const fs::path& results) {
  std::vector<fs::path> files;
  if (fs::is_directory(results)) {
    for (const auto& entry : fs::directory_iterator(results)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(results)) {
    files.push_back(results);
  } else {
    throw Error(ErrorCode::kIoError, results.string() + " does not exist");
  }
  Report rep;
  rep.json = ojson::object();
  ojson tiers = ojson::object();
  for (const auto& f : files) {
    const auto records = read_records(f);
    Tier tier;
    if (!records.empty()) {
      tier = records.front().tier;
    } else {
      tier = tier_from_string(f.stem().string());
    }
    const ojson s = summarize_records(tier, records);
    tiers[std::string(to_string(tier))] = s;
    rep.text += summary_text(tier, s) + '\n';
  }
  rep.json["tool_version"] = tool_version();
  rep.json["tiers"] = tiers;
  if (files.empty()) rep.text = "no record files found\n";
  return rep;
}

std::string summary_text(Tier tier, const nlohmann::ordered_json& s) {
  std::ostringstream os;
  os << "== " << to_string(tier) << ": " << s.value("n_records", 0) << " records, "
     << s.value("n_ok", 0) << " ok, " << s.value("n_failed", 0) << " failed\n";
  auto get = [&](const ojson& j, const char* k) {
    return j.contains(k) && j[k].is_number() ? fmt(j[k].get<double>()) : std::string("-");
  };
  switch (tier) {
    case Tier::kVerify:
    case Tier::kBifurcation:
      for (const auto& row : s.value("results", ojson::array())) {
        for (const auto& [k, v] : row.items()) {
          os << "  " << k << " = " << (v.is_number_float() ? fmt(v.get<double>(), 6) : v.dump())
             << '\n';
        }
      }
      break;
    case Tier::kLinearGrid:
      os << "  configs " << s.value("n_configs", 0) << " (diagonal " << s.value("n_diagonal", 0)
         << ", coupled " << s.value("n_coupled", 0) << ")\n"
         << "  NZ optimal: " << s.value("n_nz_optimal_diagonal", 0) << " diagonal, "
         << s.value("n_nz_optimal_coupled", 0) << " coupled\n"
         << "  coupled with fidelity < 1: " << s.value("n_coupled_fidelity_below_one", 0) << '\n';
      break;
    case Tier::kIb:
      os << "  grid configs swept " << s.value("n_grid_configs_swept", 0) << " (stated size "
         << s.value("stated_sweep_size", 0) << ")\n"
         << "  beta        ref_theta   min_coupled_theta  n<0.1deg\n";
      for (const auto& b : s.value("per_beta", ojson::array())) {
        os << "  " << std::left << std::setw(12) << b["beta"].get<double>() << std::setw(12)
           << get(b, "reference_theta_star_deg") << std::setw(19)
           << get(b, "min_theta_star_coupled_deg") << b.value("n_coupled_within_0_1_deg", 0)
           << '\n';
      }
      break;
    case Tier::kHighdim:
      os << "  N     gap_mean  gap_sd   improv%   fidelity\n";
      for (const auto& r : s.value("per_n", ojson::array())) {
        os << "  " << std::left << std::setw(6) << r["n_env"].get<int>() << std::setw(10)
           << get(r, "gap_mean") << std::setw(9) << get(r, "gap_sd") << std::setw(10)
           << fmt(r["improvement_pct_mean"].get<double>(), 2) << r["fidelity_mean"].get<double>()
           << '\n';
      }
      break;
    case Tier::kNnSweep:
      if (s.contains("fidelity")) {
        const auto& f = s["fidelity"];
        os << "  fidelity mean " << get(f, "mean") << " median " << get(f, "median") << " sd "
           << get(f, "std_dev") << " min " << get(f, "min") << " max " << get(f, "max") << '\n';
        for (const auto& [k, v] : f.items()) {
          if (k.starts_with("frac_")) os << "  " << k << " = " << fmt(v.get<double>(), 3) << '\n';
        }
        os << "  NN risk below optimal linear: " << get(s, "frac_nn_below_linear")
           << "  mean ratio " << get(s, "mean_risk_ratio") << '\n';
      }
      for (const char* part : {"highest_fidelity", "lowest_fidelity"}) {
        os << "  " << part << ":\n";
        for (const auto& r : s.value(part, ojson::array())) {
          os << "    a_s=" << r["a_s"].get<double>() << " a_e=" << r["a_e"].get<double>()
             << " c=" << r["c"].get<double>() << " eps=" << r["eps"].get<double>() << "  "
             << fmt(r["mean_fidelity"].get<double>(), 3) << " +- "
             << fmt(r["std_fidelity"].get<double>(), 3) << '\n';
        }
      }
      break;
    case Tier::kDuffing:
      for (const char* mode : {"unconstrained", "grounded"}) {
        if (!s.contains(mode)) continue;
        const auto& m = s[mode];
        os << "  " << mode << ": " << m.value("n_env_dominant", 0) << "/" << m.value("n", 0)
           << " env-dominant";
        if (m.contains("dominance")) {
          os << " [" << get(m["dominance"], "ci_low") << ", " << get(m["dominance"], "ci_high")
             << "]; inflation median " << get(m["inflation"], "median") << " IQR "
             << get(m["inflation"], "q1") << "-" << get(m["inflation"], "q3");
        }
        os << '\n';
      }
      if (s.contains("fisher_dominance")) {
        os << "  Fisher OR " << get(s["fisher_dominance"], "estimate") << " p "
           << s["fisher_dominance"]["p_value"].get<double>() << "; Mann-Whitney p "
           << s["mann_whitney_inflation"]["p_value"].get<double>() << '\n';
      }
      break;
  }
  for (const auto& f : s.value("failures", ojson::array())) {
    os << "  FAILED " << f["config"].dump() << " seed " << f["seed"].get<std::uint64_t>() << ": "
       << f["reason"].get<std::string>() << '\n';
  }
  return os.str();
}

}  // namespace pcgap
