#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace pcgap {

enum class Tier { kLinearGrid, kNnSweep, kHighdim, kDuffing, kVerify, kBifurcation, kIb };

std::string_view to_string(Tier t);
/// Throws InvalidConfig on an unknown tag.
Tier tier_from_string(std::string_view s);

/// One (config, seed) outcome. `config` holds the parameter columns and
/// `metrics` the measured ones, both in frozen column order; a failed record
/// keeps its config and seed and carries the failure reason.
struct SweepRecord {
  Tier tier = Tier::kLinearGrid;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  std::optional<std::string> failure;

  bool ok() const { return !failure.has_value(); }
  std::string status() const { return ok() ? "ok" : "failed: " + *failure; }
  /// Identity used for resume: tier, config values and seed.
  std::string key() const;
};

void to_json(nlohmann::ordered_json& j, const SweepRecord& r);
void from_json(const nlohmann::ordered_json& j, SweepRecord& r);

}  // namespace pcgap
