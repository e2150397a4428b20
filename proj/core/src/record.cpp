#include "pcgap/record.hpp"

#include <array>

#include "pcgap/error.hpp"

namespace pcgap {
namespace {

constexpr std::array<std::pair<Tier, std::string_view>, 7> kTierNames{{
    {Tier::kLinearGrid, "linear_grid"},
    {Tier::kNnSweep, "nn_sweep"},
    {Tier::kHighdim, "highdim"},
    {Tier::kDuffing, "duffing"},
    {Tier::kVerify, "verify"},
    {Tier::kBifurcation, "bifurcation"},
    {Tier::kIb, "ib"},
}};

}  // namespace

std::string_view to_string(Tier t) {
  for (const auto& [tier, name] : kTierNames) {
    if (tier == t) return name;
  }
  return "unknown";
}

Tier tier_from_string(std::string_view s) {
  for (const auto& [tier, name] : kTierNames) {
    if (name == s) return tier;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown tier '" + std::string(s) + "'");
}

std::string SweepRecord::key() const {
  return std::string(to_string(tier)) + '|' + config.dump() + '|' + std::to_string(seed);
}

void to_json(nlohmann::ordered_json& j, const SweepRecord& r) {
  j = nlohmann::ordered_json::object();
  j["tier"] = to_string(r.tier);
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["metrics"] = r.metrics;
  j["status"] = r.status();
}

void from_json(const nlohmann::ordered_json& j, SweepRecord& r) {
  r.tier = tier_from_string(j.at("tier").get<std::string>());
  r.config = j.at("config");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.metrics = j.at("metrics");
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.failure.reset();
  } else if (status.starts_with("failed: ")) {
    r.failure = status.substr(8);
  } else {
    throw Error(ErrorCode::kCorruptRecords, "bad status '" + status + "'");
  }
  if (!r.config.is_object() || !r.metrics.is_object()) {
    throw Error(ErrorCode::kCorruptRecords, "config and metrics must be objects");
  }
}

}  // namespace pcgap
