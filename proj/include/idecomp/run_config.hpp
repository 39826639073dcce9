#pragma once

// JSON schema for runs: which data to fit, the model, the optimizer and the
// evaluation grids. Parsing is strict: unknown keys and bad values are all
// collected into one ConfigError.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "idecomp/losses.hpp"
#include "idecomp/model.hpp"
#include "idecomp/synthgen.hpp"
#include "idecomp/trainer.hpp"

namespace idecomp {

/// Either a CSV file (with optional manifest) or a named generator.
struct DatasetSpec {
  std::optional<std::string> path;
  std::optional<std::string> manifest;
  std::optional<std::string> preset;  // fig1 | notes3 | images

  std::uint64_t seed = 1;
  // fig1
  std::size_t points = 2000;
  bool regular = false;
  // notes3
  std::size_t k = 3;
  std::size_t n_t = 64;
  std::size_t n_xi = 48;
  // notes3 and images: fraction of the full grid kept
  double fraction = 1.0;
  // images
  std::size_t n_images = 20;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t k_true = 10;
};

struct EvalSpec {
  std::size_t t_points = 512;   // activation statistics / export
  std::size_t xi_points = 64;   // per axis, export
};

struct RunConfig {
  DatasetSpec dataset;
  ModelConfig model;
  TrainConfig train;  // train.contrast comes from the "contrast" section
  EvalSpec eval;
  std::string output_dir = "run";
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Ready-made runs for the three built-in experiments.
RunConfig preset_run_config(const std::string& name);

/// Dataset and truth for a generator spec (preset must be set).
GeneratedData generate(const DatasetSpec& spec);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);  // without contrast
nlohmann::json to_json(const ContrastSpec& spec);
ContrastSpec contrast_from_json(const nlohmann::json& j);

}  // namespace idecomp
