#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "udi/federation/ecosystem.hpp"

namespace udi::scenario {

struct Step {
  std::string actor;
  std::string action;
  std::string outcome;
  std::optional<std::uint64_t> audit_seq;
};

struct Assertion {
  std::string name;
  bool pass = false;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<Step> steps;
  std::vector<Assertion> assertions;
  std::optional<std::string> failing_step;
  nlohmann::json details = nlohmann::json::object();
  int exit_code = 0;

  nlohmann::json to_json() const;
  std::string summary() const;
};

struct ScenarioOptions {
  std::uint64_t seed = 7;
  /// Must be absent or empty; the scenario starts from a fresh store.
  std::optional<std::filesystem::path> store_dir;
  /// Readout noise (fraction of contrast) for the revision marking trace.
  double noise = 0.05;
  double blur = 0.3;
  federation::EcosystemConfig config;
};

/// Fixed virtual start time of every scenario: 2026-01-05T08:00:00Z.
inline constexpr std::int64_t kScenarioEpoch = 1767600000;

const std::vector<std::string>& scenario_names();

/// Runs implant, revision or emergency. Throws InvalidInput for an unknown
/// name or a non-empty store directory; flow failures are reported, not thrown.
ScenarioReport run_scenario(const std::string& name, const ScenarioOptions& options);

}  // namespace udi::scenario
