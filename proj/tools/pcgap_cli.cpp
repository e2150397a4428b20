// Command-line front end: one subcommand per experiment tier plus `report`.
//
// Exit codes: 0 success, 2 partial failure (some tasks failed), 3 invalid
// configuration, 1 any other error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcgap/error.hpp"
#include "pcgap/harness.hpp"

namespace {

using pcgap::ErrorCode;
using ojson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitInvalidConfig = 3;

struct CommonFlags {
  std::string config;
  std::string scale;
  std::vector<std::uint64_t> seeds;
  std::optional<int> jobs;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON sweep configuration")->check(CLI::ExistingFile);
  cmd->add_option("--scale", f.scale, "desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--seeds", f.seeds, "seed list (comma separated)")->delimiter(',');
  cmd->add_option("--jobs", f.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory");
}

pcgap::SweepConfig build_config(pcgap::Tier tier, const CommonFlags& f) {
  ojson j = ojson::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    try {
      j = ojson::parse(in);
    } catch (const nlohmann::json::exception& ex) {
      throw pcgap::Error(ErrorCode::kInvalidConfig, f.config + ": " + ex.what());
    }
    if (j.contains("tier") && j["tier"] != pcgap::to_string(tier)) {
      throw pcgap::Error(ErrorCode::kInvalidConfig,
                         f.config + " is a '" + j["tier"].get<std::string>() +
                             "' config, not '" + std::string(pcgap::to_string(tier)) + "'");
    }
  }
  j["tier"] = pcgap::to_string(tier);
  if (!f.scale.empty()) j["scale"] = f.scale;
  if (!f.seeds.empty()) j["seeds"] = f.seeds;
  if (f.jobs) j["parallelism"] = *f.jobs;
  if (!f.out.empty()) j["output_dir"] = f.out;
  return pcgap::sweep_config_from_json(j);
}

int run_tier(pcgap::Tier tier, const CommonFlags& f) {
  const pcgap::SweepConfig cfg = build_config(tier, f);
  const auto start = std::chrono::steady_clock::now();
  const pcgap::SweepOutcome res = pcgap::run_sweep(cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << pcgap::summary_text(tier, res.summary);
  std::cout << "launched " << res.launched << ", skipped " << res.skipped << " (already done), "
            << res.failed << " failed; " << secs << " s; results in " << res.output_dir.string()
            << '\n';
  return res.partial_failure() ? kExitPartial : kExitOk;
}

int run_report(const std::string& results, const std::string& out) {
  const pcgap::Report rep = pcgap::report(results);
  std::cout << rep.text;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    const std::string header = "# pcgap " + pcgap::tool_version() + " report of " + results;
    std::ofstream(std::filesystem::path(out) / "report.txt") << header << '\n' << rep.text;
    std::ofstream(std::filesystem::path(out) / "report.json") << rep.json.dump(2) << '\n';
  }
  bool failed = false;
  for (const auto& [tier, s] : rep.json["tiers"].items()) failed |= s.value("n_failed", 0) > 0;
  return failed ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcgap: predictive-versus-causal encoder experiments"};
  app.set_version_flag("--version", pcgap::tool_version());
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    pcgap::Tier tier;
    const char* help;
  };
  const Sub subs[] = {
      {"verify", pcgap::Tier::kVerify, "closed-form counterexample checks at a parameter point"},
      {"grid", pcgap::Tier::kLinearGrid, "160-configuration deterministic linear grid"},
      {"nn-sweep", pcgap::Tier::kNnSweep, "MLP encoder sweep over the 2D parameter grid"},
      {"highdim", pcgap::Tier::kHighdim, "sphere optimization with N environment modes"},
      {"ib", pcgap::Tier::kIb, "information-bottleneck beta sweep"},
      {"bifurcation", pcgap::Tier::kBifurcation, "boundary curvature scan in the coupling c"},
      {"duffing", pcgap::Tier::kDuffing, "GRU predictors on the Duffing system"},
  };
  std::vector<CommonFlags> flags(std::size(subs));
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, flags[i]);
    cmds.push_back(cmd);
  }
  std::string results, report_out;
  CLI::App* rep = app.add_subcommand("report", "recompute aggregates from stored records");
  rep->add_option("results", results, "results directory or .jsonl file")->required();
  rep->add_option("--out", report_out, "directory for report.json and report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  try {
    if (rep->parsed()) return run_report(results, report_out);
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (cmds[i]->parsed()) return run_tier(subs[i].tier, flags[i]);
    }
  } catch (const pcgap::Error& e) {
    std::cerr << "pcgap: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidConfig || e.code() == ErrorCode::kEmptyGrid
               ? kExitInvalidConfig
               : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "pcgap: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
