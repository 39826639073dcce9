#include "idecomp/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace idecomp {
namespace {

constexpr std::uint64_t kFreshStream = 0x5eedf00dULL;

bool finite(const HistoryEntry& e) {
  return std::isfinite(e.reconstruction) && std::isfinite(e.contrast) &&
         std::isfinite(e.total);
}

HistoryEntry read_terms(const Tape& tape, const LossTerms& terms) {
  HistoryEntry e;
  e.reconstruction = tape.scalar(terms.reconstruction);
  e.contrast = terms.contrast ? tape.scalar(*terms.contrast) : 0.0;
  e.total = tape.scalar(terms.total);
  return e;
}

}  // namespace

void validate(const TrainConfig& c) {
  std::vector<std::string> problems;
  if (c.epochs < 1) problems.push_back("epochs must be >= 1");
  if (!(c.learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (c.batch_size < 2) problems.push_back("batch_size must be >= 2");
  if (c.log_every < 1) problems.push_back("log_every must be >= 1");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) {
    problems.push_back("adam beta1 must lie in [0, 1)");
  }
  if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    problems.push_back("adam beta2 must lie in [0, 1)");
  }
  if (!(c.adam_epsilon > 0.0)) problems.push_back("adam epsilon must be > 0");
  if (!(c.clip_norm >= 0.0)) problems.push_back("clip_norm must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

void save_history_csv(const TrainHistory& history,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "step,epoch,reconstruction,contrast,total\n";
  for (const HistoryEntry& e : history.entries) {
    out << e.step << ',' << e.epoch << ',' << e.reconstruction << ','
        << e.contrast << ',' << e.total << '\n';
  }
}

HistoryEntry evaluate_loss(const DecompositionModel& model,
                           const PointCloudDataset& ds, const ContrastSpec& spec) {
  const EncodedDataset data = encode_dataset(model, ds);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  Tape tape;
  TapeModel bound(model, tape);
  Rng fresh(model.seed, kFreshStream - 1);
  return read_terms(tape, total_loss(bound, data, all, spec, &fresh));
}

TrainResult train(const PointCloudDataset& ds, ModelConfig model_config,
                  const TrainConfig& config, const ProgressCallback& progress) {
  validate(ds);
  validate(config);
  if (!ds.normalized()) throw Error("train: dataset must be normalized first");

  const bool discrete_data = ds.time_mode == TimeMode::kDiscrete;
  const bool discrete_model =
      model_config.activation_mode == ActivationMode::kDiscrete;
  if (discrete_data != discrete_model) {
    throw ConfigError(std::string("activation mode '") +
                      (discrete_model ? "discrete" : "neural") +
                      "' is incompatible with a " +
                      (discrete_data ? "discrete-index" : "continuous") +
                      " dataset");
  }
  model_config.xi_dim = ds.xi_dim;
  if (discrete_model) model_config.n_times = ds.n_times;
  validate(config.contrast, model_config.k);

  TrainResult result{init_model(model_config, config.seed), {}};
  DecompositionModel& model = result.model;
  model.normalization = ds.normalization;
  TrainHistory& history = result.history;

  const EncodedDataset data = encode_dataset(model, ds);
  if (batches(ds.size(), config.batch_size, config.seed, 0).empty()) {
    throw ConfigError("dataset of " + std::to_string(ds.size()) +
                      " samples yields no batch of size >= 2");
  }

  history.initial_total = evaluate_loss(model, ds, config.contrast).total;

  OptimizerConfig opt{config.optimizer, config.learning_rate, config.adam_beta1,
                      config.adam_beta2, config.adam_epsilon};
  OptimizerState state;
  const std::size_t steps_per_epoch =
      batches(ds.size(), config.batch_size, config.seed, 0).size();
  const double total_steps = double(steps_per_epoch * config.epochs);

  std::size_t step = 0;
  double best_epoch_loss = INFINITY;
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_batches =
        batches(ds.size(), config.batch_size, config.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
      ++step;
      Rng fresh(config.seed, kFreshStream + step);
      HistoryEntry entry;
      std::vector<Matrix> grads;
      try {
        Tape tape;
        TapeModel bound(model, tape);
        const LossTerms terms =
            total_loss(bound, data, epoch_batches[b], config.contrast, &fresh);
        entry = read_terms(tape, terms);
        if (!finite(entry)) throw DomainError("non-finite loss");
        grads = tape.backward(terms.total);
      } catch (const DomainError& e) {
        throw TrainingDiverged("training diverged at step " +
                                   std::to_string(step) + ": " + e.what(),
                               step, history);
      }
      entry.step = step;
      entry.epoch = epoch;
      entry.batch = b;
      epoch_loss += entry.total;

      if (config.clip_norm > 0.0) clip_global_norm(grads, config.clip_norm);
      double lr = config.learning_rate;
      if (config.lr_schedule == LrSchedule::kCosine) {
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * double(step - 1) / total_steps));
      }
      optimizer_step(model.params, grads, state, opt, lr);

      if (step % config.log_every == 0) {
        history.entries.push_back(entry);
        if (progress) progress(entry);
      }
    }

    if (config.early_stop_patience > 0) {
      epoch_loss /= double(epoch_batches.size());
      if (epoch_loss < best_epoch_loss) {
        best_epoch_loss = epoch_loss;
        epochs_without_improvement = 0;
      } else if (++epochs_without_improvement >= config.early_stop_patience) {
        history.warnings.push_back("early stop after epoch " + std::to_string(epoch));
        break;
      }
    }
  }

  for (const Matrix& p : model.params) {
    if (!p.allFinite()) {
      throw TrainingDiverged("parameters became non-finite", step, history);
    }
  }
  history.final_total = evaluate_loss(model, ds, config.contrast).total;
  if (!(history.final_total <= history.initial_total)) {
    history.warnings.push_back("final total loss " +
                               std::to_string(history.final_total) +
                               " exceeds initial " +
                               std::to_string(history.initial_total));
  }
  return result;
}

}  // namespace idecomp
