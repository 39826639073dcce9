#pragma once

// The CLI subcommands as library functions. Each writes its outputs under
// an output directory and throws idecomp::Error on failure.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "idecomp/eval.hpp"
#include "idecomp/gradcheck.hpp"
#include "idecomp/run_config.hpp"
#include "idecomp/trainer.hpp"

namespace idecomp {

struct GenerateOptions {
  DatasetSpec spec;  // preset required
  std::filesystem::path out;
  std::size_t truth_t_points = 512;
  std::size_t truth_xi_points = 64;  // per axis
};

/// dataset.csv (raw coordinates), manifest.json, truth.json.
void cmd_generate(const GenerateOptions& options, std::ostream& log);

/// Dataset described by a spec, normalized; `truth` is filled for presets.
PointCloudDataset load_dataset(const DatasetSpec& spec,
                               std::optional<GeneratedData>* generated = nullptr);

/// Trains and writes config.json (verbatim `config_text`, or the resolved
/// config when empty), resolved_config.json, manifest.json, dataset.csv,
/// truth.json (generated data only), checkpoint.json, history.csv and
/// train_summary.json into config.output_dir.
TrainResult cmd_train(const RunConfig& config, const std::string& config_text,
                      std::ostream& log);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> truth;
  std::filesystem::path out;
  std::size_t t_points = 512;
  std::size_t xi_points = 64;
};

/// eval_report.json plus covariance.csv, bases.csv and activations.csv.
EvalReport cmd_eval(const EvalOptions& options, std::ostream& log);

/// Options for re-evaluating a training output directory on its own data.
EvalOptions eval_options_for_run(const std::filesystem::path& run_dir);

struct ExportOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::size_t t_points = 128;
  std::size_t xi_points = 64;  // per axis
};

/// bases.csv, activations.csv and reconstruction.csv on uniform grids, with
/// coordinates mapped back to the raw data frame.
void cmd_export(const ExportOptions& options, std::ostream& log);

struct GradcheckOptions {
  std::size_t cases = 100;
  std::uint64_t seed = 1;
  double h = 1e-6;
  /// Also checks the run's own model on one batch of its data.
  std::optional<RunConfig> config;
  std::size_t max_entries = 2000;
};

/// Largest relative error seen.
double cmd_gradcheck(const GradcheckOptions& options, std::ostream& log);

}  // namespace idecomp
