#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "catunet/diagnosis.hpp"
#include "catunet/model.hpp"
#include "catunet/training.hpp"

namespace catunet::cli {

/// Everything a command can be configured with. Resolution order is
/// command-line flag, then config file, then the defaults below.
struct RunConfig {
  CatUNetConfig model;
  TrainingConfig training;
  ThresholdConfig thresholds;
  int jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Overlays the keys present in `j` onto `config`. Unknown sections or keys
/// throw ValidationError so typos do not pass silently.
void apply_json(RunConfig& config, const nlohmann::json& j);

/// Reads a JSON config file and overlays it onto the defaults.
RunConfig load_run_config(const std::filesystem::path& path);

void write_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace catunet::cli
