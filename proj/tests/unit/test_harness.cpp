#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "error_code.hpp"
#include "pcgap/harness.hpp"

using namespace pcgap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pcgap_harness_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Keeps the first `lines` lines of a file.
void truncate_lines(const fs::path& p, int lines) {
  std::istringstream in(slurp(p));
  std::ostringstream out;
  std::string line;
  for (int i = 0; i < lines && std::getline(in, line); ++i) out << line << '\n';
  std::ofstream(p, std::ios::binary | std::ios::trunc) << out.str();
}

SweepConfig grid_config(const fs::path& dir, int parallelism) {
  SweepConfig cfg = default_config(Tier::kLinearGrid, Scale::kDesk);
  cfg.output_dir = dir.string();
  cfg.parallelism = parallelism;
  return cfg;
}

}  // namespace

TEST(Tier, StringRoundTrip) {
  for (auto t : {Tier::kLinearGrid, Tier::kNnSweep, Tier::kHighdim, Tier::kDuffing, Tier::kVerify,
                 Tier::kBifurcation, Tier::kIb}) {
    EXPECT_EQ(tier_from_string(to_string(t)), t);
  }
  EXPECT_EQ(oracle::code_of([] { tier_from_string("bogus"); }), ErrorCode::kInvalidConfig);
}

TEST(EnumerateConfigs, FullNnSweepAxes) {
  SweepConfig cfg = default_config(Tier::kNnSweep, Scale::kFull);
  EXPECT_EQ(nominal_config_count(cfg), 2450u);
  const auto configs = enumerate_configs(cfg);
  // Brute-force count of the stated filter over the full axes.
  std::size_t admitted = 0;
  for (double a_s : {0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (double a_e : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98}) {
      for (double c : {-0.95, -0.8, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.8, 0.95}) {
        admitted += std::abs(c) < 1.0 - std::max(a_s, a_e) ? 5 : 0;
      }
    }
  }
  EXPECT_EQ(configs.size(), admitted);
  for (const auto& c : configs) {
    const double bound = 1.0 - std::max(std::abs(c["a_s"].get<double>()),
                                         std::abs(c["a_e"].get<double>()));
    EXPECT_LT(std::abs(c["c"].get<double>()), bound);
  }
  EXPECT_EQ(configs, enumerate_configs(cfg));
}

TEST(EnumerateConfigs, FullNnSweepPublishedCount) {
  // The published survivor count. The filter does not depend on eps, so any
  // admitted count is a multiple of 5 and 539 cannot be reached.
  const auto configs = enumerate_configs(default_config(Tier::kNnSweep, Scale::kFull));
  EXPECT_EQ(configs.size(), 539u);
}

TEST(EnumerateConfigs, DeskNnSweepSubset) {
  const auto cfg = default_config(Tier::kNnSweep, Scale::kDesk);
  EXPECT_EQ(enumerate_configs(cfg).size(), 20u);
  EXPECT_EQ(cfg.seeds.size(), 2u);
}

TEST(EnumerateConfigs, SinglePointAndEmpty) {
  SweepConfig cfg = default_config(Tier::kNnSweep, Scale::kDesk);
  cfg.grids = {{"a_s", {0.5}}, {"a_e", {0.3}}, {"c", {0.2}}, {"eps", {0.5}}};
  EXPECT_EQ(enumerate_configs(cfg).size(), 1u);
  cfg.grids["c"] = {0.9};
  EXPECT_EQ(oracle::code_of([&] { enumerate_configs(cfg); }), ErrorCode::kEmptyGrid);
}

TEST(EnumerateConfigs, HighdimTwelvePerN) {
  const auto cfg = default_config(Tier::kHighdim, Scale::kFull);
  const auto configs = enumerate_configs(cfg);
  ASSERT_EQ(configs.size(), 36u);
  std::map<double, int> per_n;
  for (const auto& c : configs) ++per_n[c["n_env"].get<double>()];
  for (const auto& [n, count] : per_n) EXPECT_EQ(count, 12) << "N=" << n;
  EXPECT_EQ(enumerate_configs(default_config(Tier::kHighdim, Scale::kDesk)).size(), 24u);
}

TEST(EnumerateConfigs, LexicographicInAxisOrder) {
  const auto cfg = default_config(Tier::kDuffing, Scale::kFull);
  const auto configs = enumerate_configs(cfg);
  const auto& axes = tier_axes(Tier::kDuffing);
  for (std::size_t i = 1; i < configs.size(); ++i) {
    std::vector<double> a, b;
    for (const auto& ax : axes) {
      a.push_back(configs[i - 1][ax].get<double>());
      b.push_back(configs[i][ax].get<double>());
    }
    EXPECT_LT(a, b);
  }
}

TEST(SweepConfig, JsonRoundTripEveryTemplate) {
  for (auto t : {Tier::kLinearGrid, Tier::kNnSweep, Tier::kHighdim, Tier::kDuffing, Tier::kVerify,
                 Tier::kBifurcation, Tier::kIb}) {
    for (auto s : {Scale::kDesk, Scale::kFull}) {
      SweepConfig cfg = default_config(t, s);
      cfg.output_dir = "somewhere";
      cfg.parallelism = 3;
      const nlohmann::ordered_json j = cfg;
      EXPECT_EQ(sweep_config_from_json(j), cfg) << to_string(t);
      EXPECT_EQ(sweep_config_from_json(nlohmann::ordered_json::parse(j.dump())), cfg);
    }
  }
}

TEST(SweepConfig, RejectsBadInput) {
  nlohmann::ordered_json j = default_config(Tier::kVerify, Scale::kDesk);
  j["surprise"] = 1;
  EXPECT_EQ(oracle::code_of([&] { sweep_config_from_json(j); }), ErrorCode::kInvalidConfig);

  SweepConfig cfg = default_config(Tier::kNnSweep, Scale::kDesk);
  cfg.grids["nonsense"] = {1.0};
  EXPECT_EQ(oracle::code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
  cfg = default_config(Tier::kNnSweep, Scale::kDesk);
  cfg.seeds.clear();
  EXPECT_EQ(oracle::code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
  cfg = default_config(Tier::kNnSweep, Scale::kDesk);
  cfg.options.nn_epochs = 0;
  EXPECT_EQ(oracle::code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
}

TEST(SweepConfig, HashIgnoresPlacementOnly) {
  SweepConfig a = default_config(Tier::kHighdim, Scale::kDesk);
  SweepConfig b = a;
  b.output_dir = "elsewhere";
  b.parallelism = 7;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.options.restarts = 51;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(header_line(a), "# pcgap " + tool_version() + " config_hash=" + config_hash(a));
}

TEST(RunSweep, VerifySummary) {
  const fs::path dir = scratch("verify");
  SweepConfig cfg = default_config(Tier::kVerify, Scale::kDesk);
  cfg.output_dir = dir.string();
  const auto out = run_sweep(cfg);
  ASSERT_EQ(out.ok, 1u);
  const auto& m = out.summary["results"][0];
  EXPECT_NEAR(m["r_nz"].get<double>(), 0.174, 1e-3);
  EXPECT_NEAR(m["r_env"].get<double>(), 0.100, 1e-3);
  EXPECT_NEAR(m["r_star"].get<double>(), 0.074, 1e-3);
  EXPECT_NEAR(m["theta_star_deg"].get<double>(), 43.7, 0.1);
  for (const char* f : {"verify.csv", "verify.jsonl", "summary.json", "summary.txt",
                        "effective_config.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const std::string header = header_line(cfg);
  EXPECT_EQ(slurp(dir / "verify.csv").rfind(header, 0), 0u);
  EXPECT_EQ(slurp(dir / "summary.txt").rfind(header, 0), 0u);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["header"]["config_hash"], config_hash(cfg));
  fs::remove_all(dir);
}

TEST(RunSweep, CsvColumnsAreFrozen) {
  const fs::path dir = scratch("columns");
  run_sweep(grid_config(dir, 1));
  std::istringstream in(slurp(dir / "linear_grid.csv"));
  std::string header, columns;
  std::getline(in, header);
  std::getline(in, columns);
  std::string expected;
  for (const auto& c : record_columns(Tier::kLinearGrid)) expected += (expected.empty() ? "" : ",") + c;
  EXPECT_EQ(columns, expected);
  fs::remove_all(dir);
}

TEST(RunSweep, ScheduleIndependent) {
  const fs::path one = scratch("sched1"), four = scratch("sched4");
  const auto a = run_sweep(grid_config(one, 1));
  const auto b = run_sweep(grid_config(four, 4));
  EXPECT_EQ(slurp(one / "linear_grid.jsonl"), slurp(four / "linear_grid.jsonl"));
  EXPECT_EQ(slurp(one / "linear_grid.csv"), slurp(four / "linear_grid.csv"));
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
  fs::remove_all(one);
  fs::remove_all(four);
}

TEST(RunSweep, ResumesToIdenticalBytes) {
  const fs::path dir = scratch("resume");
  const auto cfg = grid_config(dir, 2);
  run_sweep(cfg);
  const std::string jsonl = slurp(dir / "linear_grid.jsonl");
  const std::string csv = slurp(dir / "linear_grid.csv");
  // Header line plus 50 records in the JSONL; header, column row and 50 in the CSV.
  truncate_lines(dir / "linear_grid.jsonl", 51);
  truncate_lines(dir / "linear_grid.csv", 52);
  const auto resumed = run_sweep(cfg);
  EXPECT_EQ(resumed.skipped, 50u);
  EXPECT_EQ(resumed.launched, 110u);
  EXPECT_EQ(slurp(dir / "linear_grid.jsonl"), jsonl);
  EXPECT_EQ(slurp(dir / "linear_grid.csv"), csv);
  const auto again = run_sweep(cfg);
  EXPECT_EQ(again.launched, 0u);
  EXPECT_EQ(slurp(dir / "linear_grid.jsonl"), jsonl);
  fs::remove_all(dir);
}

TEST(RunSweep, RefusesForeignResults) {
  const fs::path dir = scratch("foreign");
  SweepConfig cfg = default_config(Tier::kHighdim, Scale::kDesk);
  cfg.grids["n_env"] = {2};
  cfg.options.restarts = 2;
  cfg.output_dir = dir.string();
  run_sweep(cfg);
  cfg.options.restarts = 3;
  EXPECT_EQ(oracle::code_of([&] { run_sweep(cfg); }), ErrorCode::kInvalidConfig);
  fs::remove_all(dir);
}

TEST(Report, RecomputesFromRecords) {
  const fs::path dir = scratch("report");
  const auto out = run_sweep(grid_config(dir, 1));
  const auto rep = report(dir);
  const auto& tier = rep.json["tiers"]["linear_grid"];
  for (const auto& [key, value] : tier.items()) EXPECT_EQ(value, out.summary[key]) << key;
  EXPECT_EQ(rep.json["tiers"]["linear_grid"]["n_nz_optimal"], 40);
  EXPECT_NE(rep.text.find("linear_grid"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Report, EmptyButValidFile) {
  const fs::path dir = scratch("empty");
  fs::create_directories(dir);
  std::ofstream(dir / "duffing.jsonl") << "# pcgap " << tool_version() << " config_hash=0\n";
  const auto rep = report(dir);
  EXPECT_EQ(rep.json["tiers"]["duffing"]["n_records"], 0);
  EXPECT_EQ(rep.json["tiers"]["duffing"]["unconstrained"]["n"], 0);
  fs::remove_all(dir);
}

TEST(Report, CorruptRecordsNameTheLine) {
  const fs::path dir = scratch("corrupt");
  fs::create_directories(dir);
  const fs::path f = dir / "verify.jsonl";
  std::ofstream(f) << "# header\n{\"not\": \"a record\"}\n";
  try {
    read_records(f);
    FAIL() << "expected CorruptRecords";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptRecords);
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(SweepRecord, JsonRoundTrip) {
  SweepRecord r;
  r.tier = Tier::kDuffing;
  r.config["alpha_e"] = 0.01;
  r.seed = 4;
  r.failure = "TaskFailed: boom";
  const nlohmann::ordered_json j = r;
  const auto back = j.get<SweepRecord>();
  EXPECT_EQ(back.status(), r.status());
  EXPECT_EQ(back.key(), r.key());
  nlohmann::ordered_json bad = j;
  bad["status"] = "maybe";
  EXPECT_EQ(oracle::code_of([&] { (void)bad.get<SweepRecord>(); }), ErrorCode::kCorruptRecords);
}
