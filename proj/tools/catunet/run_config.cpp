#include "run_config.hpp"

#include <fmt/format.h>
#include <fstream>
#include <set>

#include "catunet/errors.hpp"

namespace catunet::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, std::string_view where, const std::set<std::string>& known) {
  if (!section.is_object()) throw ValidationError(fmt::format("config: '{}' must be an object", where));
  for (const auto& [key, value] : section.items()) {
    if (!known.contains(key)) throw ValidationError(fmt::format("config: unknown key '{}.{}'", where, key));
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("config: bad value for '{}': {}", key, e.what()));
  }
}

template <typename T>
void read(const json& section, const char* key, std::optional<T>& out) {
  if (!section.contains(key)) return;
  if (section.at(key).is_null()) {
    out.reset();
    return;
  }
  T value{};
  read(section, key, value);
  out = value;
}

template <typename T>
json optional_json(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  training.validate();
  thresholds.validate();
  if (jobs < 1) throw ValidationError(fmt::format("jobs must be >= 1, got {}", jobs));
}

nlohmann::json RunConfig::to_json() const {
  return json{
      {"model",
       {{"input_channels", model.input_channels},
        {"input_size", model.input_size},
        {"depth", model.depth},
        {"base_channels", model.base_channels},
        {"channel_growth", model.channel_growth},
        {"kernel_size", model.kernel_size},
        {"dropout_rate", model.dropout_rate},
        {"output_channels", model.resolved_output_channels()}}},
      {"training",
       {{"learning_rate", training.learning_rate},
        {"epochs", training.epochs},
        {"batch_size", training.batch_size},
        {"decay_rate", training.decay_rate},
        {"patience", training.patience},
        {"reg_weight", training.reg_weight},
        {"feature_bound", optional_json(training.feature_bound)},
        {"schedule_mode", std::string(schedule_mode_name(training.schedule_mode))},
        {"validation_fraction", training.validation_fraction},
        {"seed", training.seed},
        {"max_train_samples", optional_json(training.max_train_samples)}}},
      {"diagnosis",
       {{"sample_threshold", thresholds.sample_threshold},
        {"pixel_threshold", optional_json(thresholds.pixel_threshold)},
        {"intensity_scale", thresholds.intensity_scale}}},
      {"jobs", jobs},
  };
}

void apply_json(RunConfig& config, const nlohmann::json& j) {
  reject_unknown(j, "config", {"model", "training", "diagnosis", "jobs"});
  read(j, "jobs", config.jobs);

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, "model", {"input_channels", "input_size", "depth", "base_channels", "channel_growth",
                                "kernel_size", "dropout_rate", "output_channels"});
    read(m, "input_channels", config.model.input_channels);
    read(m, "input_size", config.model.input_size);
    read(m, "depth", config.model.depth);
    read(m, "base_channels", config.model.base_channels);
    read(m, "channel_growth", config.model.channel_growth);
    read(m, "kernel_size", config.model.kernel_size);
    read(m, "dropout_rate", config.model.dropout_rate);
    read(m, "output_channels", config.model.output_channels);
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    reject_unknown(t, "training", {"learning_rate", "epochs", "batch_size", "decay_rate", "patience", "reg_weight",
                                   "feature_bound", "schedule_mode", "validation_fraction", "seed",
                                   "max_train_samples"});
    read(t, "learning_rate", config.training.learning_rate);
    read(t, "epochs", config.training.epochs);
    read(t, "batch_size", config.training.batch_size);
    read(t, "decay_rate", config.training.decay_rate);
    read(t, "patience", config.training.patience);
    read(t, "reg_weight", config.training.reg_weight);
    read(t, "feature_bound", config.training.feature_bound);
    read(t, "validation_fraction", config.training.validation_fraction);
    read(t, "seed", config.training.seed);
    read(t, "max_train_samples", config.training.max_train_samples);
    if (t.contains("schedule_mode")) {
      std::string mode;
      read(t, "schedule_mode", mode);
      config.training.schedule_mode = parse_schedule_mode(mode);
    }
  }

  if (j.contains("diagnosis")) {
    const json& d = j.at("diagnosis");
    reject_unknown(d, "diagnosis", {"sample_threshold", "pixel_threshold", "intensity_scale"});
    read(d, "sample_threshold", config.thresholds.sample_threshold);
    read(d, "pixel_threshold", config.thresholds.pixel_threshold);
    read(d, "intensity_scale", config.thresholds.intensity_scale);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("config {}: {}", path.string(), e.what()));
  }
  RunConfig config;
  apply_json(config, j);
  return config;
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot write config");
  out << config.to_json().dump(2) << '\n';
}

}  // namespace catunet::cli
