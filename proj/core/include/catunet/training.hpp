#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catunet/data_io.hpp"
#include "catunet/model.hpp"
#include "catunet/rng.hpp"

namespace catunet {

enum class ScheduleMode {
  /// Multiply the rate by gamma after `patience` epochs without improvement.
  plateau,
  /// eta_{t+1} = eta_t * gamma^floor(t / patience), t the 0-based epoch index.
  literal_exponential,
};

std::string_view schedule_mode_name(ScheduleMode mode);
ScheduleMode parse_schedule_mode(std::string_view text);

struct TrainingConfig {
  double learning_rate = 0.01;
  int epochs = 50;
  int batch_size = 8;
  double decay_rate = 0.1;
  int patience = 10;
  /// Weight of the L2 parameter penalty.
  double reg_weight = 0.0;
  /// Monitor-only bound on decoder concat feature norms; warns when exceeded.
  std::optional<double> feature_bound;
  ScheduleMode schedule_mode = ScheduleMode::plateau;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Exceeding this only logs a warning; the data is never truncated.
  std::optional<int> max_train_samples = 100;
  /// When set, the best model so far is written here after each improvement.
  std::optional<std::filesystem::path> best_checkpoint;

  void validate() const;
};

inline constexpr double kImprovementTolerance = 1e-6;

struct SchedulerState {
  double current_lr = 0.0;
  double best_val_loss = 0.0;
  int epochs_since_improvement = 0;
  int reductions_applied = 0;
  /// Number of updates applied so far (the epoch index t of the literal mode).
  int epochs_seen = 0;
  bool has_best = false;

  static SchedulerState initial(const TrainingConfig& config);
};

SchedulerState schedule_update(SchedulerState state, double val_loss, const TrainingConfig& config);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Shuffled disjoint split of [0, count). The validation part holds
/// floor(count * fraction) items.
SplitIndices split(std::size_t count, double validation_fraction, Rng& rng);

/// Sum of squared parameter values.
double l2_penalty(const CatUNetModel& model);

/// MSE(batch, reconstruction) + reg_weight * l2_penalty, inference mode.
double loss(const CatUNetModel& model, const Tensor& batch, double reg_weight = 0.0);

/// theta <- theta - lr * grad for every parameter. Throws MissingGradientError
/// before touching anything if a parameter lacks a gradient.
void sgd_step(CatUNetModel& model, double lr);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  /// Learning rate used for this epoch's updates.
  double lr = 0.0;
  std::vector<double> feature_norms;

  double max_feature_norm() const;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<int> best_epoch;
  std::optional<std::filesystem::path> best_checkpoint;
  /// Indices into the training samples that were held out for validation.
  std::vector<std::size_t> validation_indices;

  /// Header `epoch,train_loss,val_loss,lr,max_feature_norm`, one row per epoch.
  std::string to_csv() const;
};

/// Trains `model` in place as an autoencoder on `samples` (all positives) and
/// restores the parameters of the best validation epoch at the end.
TrainReport train(CatUNetModel& model, std::span<const ImageSample> samples, const TrainingConfig& config);

}  // namespace catunet
