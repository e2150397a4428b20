#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcgap/record.hpp"

namespace pcgap {

enum class Scale { kDesk, kFull };
std::string_view to_string(Scale s);
Scale scale_from_string(std::string_view s);

/// Tier-specific knobs. Every field has a desk default; full-scale values
/// come from default_config(tier, Scale::kFull).
struct SweepOptions {
  // nn_sweep
  int nn_epochs = 300;
  int nn_trajectories = 500;
  int nn_length = 20;
  double nn_learning_rate = 1e-3;
  /// Evenly spaced subset of the surviving configurations; 0 keeps all.
  int nn_config_limit = 20;
  int fidelity_points = 1000;
  double fidelity_step = 1e-4;
  double q_e = 0.10;
  // highdim
  int restarts = 50;
  double highdim_a_s = 0.05;
  // duffing
  int duffing_epochs = 60;
  int duffing_train_trajectories = 40;
  int duffing_length = 80;
  int duffing_test_trajectories = 200;
  double dominance_threshold = 1.0;
  double ood_alpha_factor = 3.0;
  double ood_sigma_factor = 2.0;
  // bifurcation
  double c_lo = -0.90;
  double c_hi = 0.0;
  int bifurcation_grid = 64;
  // verify / grid / ib
  int profile_points = 4001;
  double robustness_radius = 0.01;
  int robustness_samples = 1000;

  friend bool operator==(const SweepOptions&, const SweepOptions&) = default;
};

struct SweepConfig {
  Tier tier = Tier::kVerify;
  /// Axis name -> values. Axis names are fixed per tier (tier_axes).
  std::map<std::string, std::vector<double>> grids;
  std::vector<std::uint64_t> seeds{0};
  Scale scale = Scale::kDesk;
  std::string output_dir = "results";
  /// Worker count; 0 uses the hardware concurrency.
  int parallelism = 0;
  SweepOptions options;

  /// Throws InvalidConfig on unknown or missing axes, empty seed lists or
  /// non-positive counts.
  void validate() const;
  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Canonical axis order for a tier; enumeration is lexicographic in it.
const std::vector<std::string>& tier_axes(Tier t);

/// The documented template for (tier, scale).
SweepConfig default_config(Tier t, Scale s);

void to_json(nlohmann::ordered_json& j, const SweepConfig& cfg);
/// Missing fields take the defaults of (tier, scale); unknown keys throw
/// InvalidConfig.
SweepConfig sweep_config_from_json(const nlohmann::ordered_json& j);
SweepConfig load_sweep_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON of everything that shapes results
/// (output_dir and parallelism excluded), as 16 hex digits.
std::string config_hash(const SweepConfig& cfg);

/// "# pcgap <version> config_hash=<hash>"
std::string header_line(const SweepConfig& cfg);

std::string tool_version();

using ConfigTuple = nlohmann::ordered_json;

/// Cartesian product of the tier's axes in lexicographic axis order, with the
/// stability filter |c| < 1 - max(|a_s|, |a_e|) on nn_sweep. linear_grid
/// returns the built-in 160 configurations. Throws EmptyGrid if nothing is
/// left.
std::vector<ConfigTuple> enumerate_configs(const SweepConfig& cfg);

/// Product size before filtering (2450 for the full nn_sweep axes).
std::size_t nominal_config_count(const SweepConfig& cfg);

/// Runs one (config, seed) task. Failures come back as failed records.
SweepRecord run_task(const SweepConfig& cfg, const ConfigTuple& config, std::uint64_t seed);

/// Frozen CSV column order for a tier (config columns, seed, metrics,
/// status).
const std::vector<std::string>& record_columns(Tier t);

struct SweepOutcome {
  std::filesystem::path output_dir;
  std::size_t launched = 0;
  std::size_t skipped = 0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  nlohmann::ordered_json summary;
  bool partial_failure() const { return failed > 0; }
};

/// Executes every pending (config, seed) task with bounded parallelism.
/// Records are appended in task order to <tier>.csv and <tier>.jsonl, so an
/// interrupted run resumes by skipping the completed prefix and ends with
/// the same bytes. Writes summary.json, effective_config.json and the
/// tier's plot-data CSVs. Throws InvalidConfig if the directory holds
/// records from a different config hash.
SweepOutcome run_sweep(const SweepConfig& cfg);

/// Aggregates for one tier computed from raw records.
nlohmann::ordered_json summarize_records(Tier tier, const std::vector<SweepRecord>& records);

/// Parses a JSONL records file. Lines starting with '#' are headers. Throws
/// CorruptRecords naming the offending line numbers.
std::vector<SweepRecord> read_records(const std::filesystem::path& path);

struct Report {
  nlohmann::ordered_json json;
  std::string text;
};

/// Recomputes summaries from every <tier>.jsonl in `results_dir` (or a
/// single .jsonl file).
Report report(const std::filesystem::path& results);

/// Plain-text rendering of a tier summary.
std::string summary_text(Tier tier, const nlohmann::ordered_json& summary);

}  // namespace pcgap
