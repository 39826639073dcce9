#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "idecomp/error.hpp"
#include "idecomp/losses.hpp"
#include "idecomp/model.hpp"
#include "idecomp/optimizer.hpp"
#include "idecomp/pointcloud.hpp"

namespace idecomp {

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  ContrastSpec contrast;
  std::size_t log_every = 1;         // optimizer steps between history rows
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double clip_norm = 0.0;            // 0 disables clipping
  std::size_t early_stop_patience = 0;  // epochs; 0 disables
};

void validate(const TrainConfig& config);

struct HistoryEntry {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double reconstruction = 0.0;
  double contrast = 0.0;
  double total = 0.0;
};

struct TrainHistory {
  std::vector<HistoryEntry> entries;
  double initial_total = 0.0;  // full-dataset loss before training
  double final_total = 0.0;    // full-dataset loss after training
  std::vector<std::string> warnings;
};

void save_history_csv(const TrainHistory& history,
                      const std::filesystem::path& path);

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::size_t step, TrainHistory history)
      : Error(what), step_(step), history_(std::move(history)) {}
  std::size_t step() const { return step_; }
  const TrainHistory& history() const { return history_; }

 private:
  std::size_t step_;
  TrainHistory history_;
};

struct TrainResult {
  DecompositionModel model;
  TrainHistory history;
};

using ProgressCallback = std::function<void(const HistoryEntry&)>;

/// Loss terms of a model on a whole dataset.
HistoryEntry evaluate_loss(const DecompositionModel& model,
                           const PointCloudDataset& ds, const ContrastSpec& spec);

/// Minibatch gradient descent on total_loss: for each epoch, for each batch
/// of batches(ds, batch_size, seed, epoch): forward, backward, optimizer step.
/// xi_dim and (discrete mode) n_times are taken from the dataset, which must
/// already be normalized.
TrainResult train(const PointCloudDataset& ds, ModelConfig model_config,
                  const TrainConfig& config, const ProgressCallback& progress = {});

}  // namespace idecomp
