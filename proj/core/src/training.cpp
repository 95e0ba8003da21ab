#include "catunet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "catunet/errors.hpp"
#include "catunet/log.hpp"
#include "catunet/metrics.hpp"
#include "catunet/ops.hpp"

namespace catunet {

std::string_view schedule_mode_name(ScheduleMode mode) {
  return mode == ScheduleMode::plateau ? "plateau" : "literal_exponential";
}

ScheduleMode parse_schedule_mode(std::string_view text) {
  if (text == "plateau") return ScheduleMode::plateau;
  if (text == "literal_exponential") return ScheduleMode::literal_exponential;
  throw ValidationError(fmt::format("unknown schedule mode '{}' (expected plateau or literal_exponential)", text));
}

void TrainingConfig::validate() const {
  std::vector<std::string> problems;
  if (!(learning_rate >= 0.0 && std::isfinite(learning_rate))) problems.push_back("learning_rate must be >= 0");
  if (epochs < 0) problems.push_back("epochs must be >= 0");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (!(decay_rate > 0.0 && decay_rate < 1.0)) problems.push_back("decay_rate must lie in (0, 1)");
  if (patience < 1) problems.push_back("patience must be >= 1");
  if (!(reg_weight >= 0.0)) problems.push_back("reg_weight must be >= 0");
  if (feature_bound && !(*feature_bound > 0.0)) problems.push_back("feature_bound must be > 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    problems.push_back("validation_fraction must lie in [0, 1)");
  }
  if (max_train_samples && *max_train_samples < 1) problems.push_back("max_train_samples must be >= 1");
  if (!problems.empty()) {
    std::string message = "invalid training config:";
    for (const auto& p : problems) message += " " + p + ";";
    message.pop_back();
    throw ValidationError(message);
  }
}

SchedulerState SchedulerState::initial(const TrainingConfig& config) {
  SchedulerState state;
  state.current_lr = config.learning_rate;
  return state;
}

SchedulerState schedule_update(SchedulerState state, double val_loss, const TrainingConfig& config) {
  if (!state.has_best || val_loss < state.best_val_loss - kImprovementTolerance) {
    state.best_val_loss = val_loss;
    state.has_best = true;
    state.epochs_since_improvement = 0;
  } else {
    ++state.epochs_since_improvement;
  }

  if (config.schedule_mode == ScheduleMode::plateau) {
    if (state.epochs_since_improvement >= config.patience) {
      state.current_lr *= config.decay_rate;
      state.epochs_since_improvement = 0;
      ++state.reductions_applied;
    }
  } else {
    const int exponent = state.epochs_seen / config.patience;
    for (int i = 0; i < exponent; ++i) state.current_lr *= config.decay_rate;
    state.reductions_applied += exponent;
  }
  ++state.epochs_seen;
  return state;
}

SplitIndices split(std::size_t count, double validation_fraction, Rng& rng) {
  if (count == 0) throw ValidationError("split: dataset is empty");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError(fmt::format("split: validation fraction {} outside [0, 1)", validation_fraction));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(count) * validation_fraction + 1e-9));
  if (n_val >= count) {
    throw ValidationError(fmt::format("split: fraction {} leaves no training samples out of {}", validation_fraction,
                                      count));
  }
  SplitIndices out;
  out.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return out;
}

double l2_penalty(const CatUNetModel& model) {
  double total = 0.0;
  for (const auto& p : model.parameters()) {
    for (float v : p.value.values()) total += static_cast<double>(v) * v;
  }
  return total;
}

double loss(const CatUNetModel& model, const Tensor& batch, double reg_weight) {
  const double mse = image_mse(batch, model.infer(batch));
  return reg_weight == 0.0 ? mse : mse + reg_weight * l2_penalty(model);
}

void sgd_step(CatUNetModel& model, double lr) {
  for (const auto& p : model.parameters()) {
    if (!p.value.has_grad()) throw MissingGradientError(p.name);
  }
  const auto rate = static_cast<float>(lr);
  for (auto& p : model.parameters()) {
    auto values = p.value.values();
    const auto grad = p.value.grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= rate * grad[i];
  }
}

double EpochRecord::max_feature_norm() const {
  if (feature_norms.empty()) return 0.0;
  return *std::max_element(feature_norms.begin(), feature_norms.end());
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,lr,max_feature_norm\n";
  for (const auto& r : epochs) {
    out += fmt::format("{},{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.lr, r.max_feature_norm());
  }
  return out;
}

namespace {

double mean_mse(const CatUNetModel& model, std::span<const ImageSample> samples, std::span<const std::size_t> indices,
                int batch_size) {
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto chunk = indices.subspan(start, std::min<std::size_t>(batch_size, indices.size() - start));
    const Tensor batch = stack_batch(samples, chunk);
    total += image_mse(batch, model.infer(batch)) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(indices.size());
}

std::vector<Tensor> snapshot(const CatUNetModel& model) {
  std::vector<Tensor> out;
  for (const auto& p : model.parameters()) out.emplace_back(p.value.shape(), std::vector<float>(p.value.values().begin(), p.value.values().end()));
  return out;
}

}  // namespace

TrainReport train(CatUNetModel& model, std::span<const ImageSample> samples, const TrainingConfig& config) {
  config.validate();
  if (samples.empty()) throw ValidationError("train: dataset is empty");
  for (const auto& s : samples) {
    if (s.truth_label && *s.truth_label != Label::positive) {
      throw ValidationError(fmt::format("train: sample '{}' is not a positive; training uses positives only", s.id));
    }
  }

  Rng shuffle_rng(config.seed, Stream::shuffle);
  Rng split_rng = shuffle_rng.child(0);
  const SplitIndices parts = split(samples.size(), config.validation_fraction, split_rng);
  if (config.max_train_samples && parts.train.size() > static_cast<std::size_t>(*config.max_train_samples)) {
    log::warn(fmt::format("training set has {} samples, above the limit of {}", parts.train.size(),
                          *config.max_train_samples));
  }
  if (parts.validation.empty()) log::info("no validation samples; scheduling on training loss");

  // Feature norms are monitored on a fixed batch of the held-out set.
  const auto& monitor_pool = parts.validation.empty() ? parts.train : parts.validation;
  const std::vector<std::size_t> monitor_indices(
      monitor_pool.begin(),
      monitor_pool.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(config.batch_size, monitor_pool.size())));
  const Tensor monitor_batch = stack_batch(samples, monitor_indices);

  Rng dropout_rng(config.seed, Stream::dropout);
  SchedulerState scheduler = SchedulerState::initial(config);
  TrainReport report;
  report.validation_indices = parts.validation;
  std::vector<Tensor> best_parameters;
  double best_loss = 0.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = parts.train;
    Rng epoch_rng = shuffle_rng.child(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[epoch_rng.below(i)]);

    const double lr = scheduler.current_lr;
    double train_total = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      ++batch_index;
      const auto chunk = std::span<const std::size_t>(order).subspan(
          start, std::min<std::size_t>(config.batch_size, order.size() - start));
      Graph graph;
      const NodeId input = graph.constant(stack_batch(samples, chunk));
      const ForwardTrace trace = model.forward(graph, input, {.training = true, .track_gradients = true, .rng = &dropout_rng});
      const NodeId mse = ops::mse(graph, trace.output, input);
      const double batch_loss = graph.value(mse)[0];
      if (!std::isfinite(batch_loss)) throw TrainingAborted(epoch, batch_index, "loss is not finite");
      graph.backward(mse);
      model.zero_gradients();
      model.accumulate_gradients(graph, trace);
      if (config.reg_weight != 0.0) {
        const auto factor = static_cast<float>(2.0 * config.reg_weight);
        for (auto& p : model.parameters()) {
          auto grad = p.value.grad();
          const auto values = p.value.values();
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += factor * values[i];
        }
      }
      sgd_step(model, lr);
      train_total += batch_loss * static_cast<double>(chunk.size());
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.train_loss = train_total / static_cast<double>(order.size());
    record.val_loss = parts.validation.empty() ? record.train_loss
                                               : mean_mse(model, samples, parts.validation, config.batch_size);
    if (!std::isfinite(record.val_loss)) throw TrainingAborted(epoch, batch_index, "validation loss is not finite");
    record.feature_norms = model.feature_norms(monitor_batch);
    if (config.feature_bound && record.max_feature_norm() > *config.feature_bound) {
      log::warn(fmt::format("epoch {}: concat feature norm {} exceeds bound {}", epoch, record.max_feature_norm(),
                            *config.feature_bound));
    }
    std::string line = fmt::format("epoch {}/{}: train {:.6g} val {:.6g} lr {:.3g}", epoch, config.epochs,
                                   record.train_loss, record.val_loss, lr);
    if (config.reg_weight != 0.0) line += fmt::format(" l2 term {:.6g}", config.reg_weight * l2_penalty(model));
    log::info(line);

    if (!report.best_epoch || record.val_loss < best_loss - kImprovementTolerance) {
      report.best_epoch = epoch;
      best_loss = record.val_loss;
      best_parameters = snapshot(model);
      if (config.best_checkpoint) {
        save_checkpoint(model, *config.best_checkpoint);
        report.best_checkpoint = config.best_checkpoint;
      }
    }
    scheduler = schedule_update(scheduler, record.val_loss, config);
    report.epochs.push_back(std::move(record));
  }

  if (!best_parameters.empty()) {
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::copy(best_parameters[i].values().begin(), best_parameters[i].values().end(), params[i].value.values().begin());
    }
  }
  return report;
}

}  // namespace catunet
