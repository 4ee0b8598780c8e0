#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "json.hpp"

namespace fshe::app {

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::string> artifacts;  ///< in write order, manifest.json excluded
  double wall_clock_seconds = 0.0;
  std::string started_utc;
  std::uint64_t seed = 0;
  nlohmann::ordered_json versions;
};

struct RunOutcome {
  RunManifest manifest;
  nlohmann::ordered_json summary;  ///< the command's main report
};

/// Runs a validated config: writes every artifact into config.out_dir and then
/// manifest.json. On failure the artifacts written so far are removed and the
/// exception is rethrown (HypothesisNotMet, fshe::Error, IoError).
RunOutcome run_experiment(const ExperimentConfig& config);

nlohmann::ordered_json to_json(const RunManifest& manifest);

}  // namespace fshe::app
