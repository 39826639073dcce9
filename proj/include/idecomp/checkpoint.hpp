#pragma once

#include <filesystem>

#include <json.hpp>

#include "idecomp/model.hpp"

namespace idecomp {

inline constexpr int kCheckpointVersion = 1;

/// JSON document holding the model config, seed, normalization, Fourier
/// frequencies, layer weights and (discrete mode) the activation matrix.
/// Matrices are stored row-major; doubles round-trip exactly.
nlohmann::json checkpoint_json(const DecompositionModel& model);
DecompositionModel model_from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const DecompositionModel& model, const std::filesystem::path& path);
DecompositionModel load_checkpoint(const std::filesystem::path& path);

}  // namespace idecomp
