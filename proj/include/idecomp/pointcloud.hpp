#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace idecomp {

/// One observation (t, xi, value) of the sampled process.
struct Sample {
  double t = 0.0;
  std::vector<double> xi;
  double value = 0.0;
};

enum class TimeMode { kContinuous, kDiscrete };

/// Affine map for one axis: normalized = (raw - offset) / scale.
struct AxisMap {
  double offset = 0.0;
  double scale = 1.0;

  double forward(double raw) const { return (raw - offset) / scale; }
  double inverse(double normalized) const { return normalized * scale + offset; }
};

struct NormalizationInfo {
  AxisMap t;
  std::vector<AxisMap> xi;
};

struct PointCloudDataset {
  std::vector<Sample> samples;
  std::size_t xi_dim = 0;
  TimeMode time_mode = TimeMode::kContinuous;
  /// Number of discrete time indices (discrete mode only).
  std::size_t n_times = 0;
  /// Set once coordinates have been mapped to [0, 1].
  std::optional<NormalizationInfo> normalization;

  std::size_t size() const { return samples.size(); }
  bool normalized() const { return normalization.has_value(); }

  /// Discrete-mode time index of a normalized t.
  std::size_t time_index(double t_normalized) const;
};

/// Throws if the dataset is empty, has ragged xi vectors or non-finite fields.
void validate(const PointCloudDataset& ds);

/// Reads `t,xi_1..xi_d,value` (header names, any column order).
PointCloudDataset load_csv(const std::filesystem::path& path);
void save_csv(const PointCloudDataset& ds, const std::filesystem::path& path);

/// Min-max maps t and each xi axis to [0, 1]. A constant axis is shifted so
/// that its value lands on 0.5. Discrete datasets map index i to i/(n-1).
PointCloudDataset normalize(const PointCloudDataset& ds);
PointCloudDataset apply_normalization(const PointCloudDataset& ds,
                                      const NormalizationInfo& info);
PointCloudDataset denormalize(const PointCloudDataset& ds);

/// Row-major (t outer, xi inner) dataset from an N_t x N_xi table.
PointCloudDataset from_grid(const std::vector<std::vector<double>>& values,
                            const std::vector<double>& t_coords,
                            const std::vector<double>& xi_coords);

/// Uniform random subset without replacement of size ceil(fraction * n).
/// Selected samples keep their relative order.
PointCloudDataset irregular_subsample(const PointCloudDataset& ds,
                                      double fraction, std::uint64_t seed);

/// Shuffled partition of [0, n); a final batch shorter than 2 is dropped.
std::vector<std::vector<std::size_t>> batches(std::size_t n,
                                              std::size_t batch_size,
                                              std::uint64_t seed,
                                              std::uint64_t epoch);

// Sidecar manifest.
nlohmann::json manifest_json(const PointCloudDataset& ds);
/// Applies xi_dim / time_mode / normalization from a manifest to a raw
/// dataset loaded from CSV.
PointCloudDataset apply_manifest(const PointCloudDataset& raw,
                                 const nlohmann::json& manifest);

nlohmann::json to_json(const NormalizationInfo& info);
NormalizationInfo normalization_from_json(const nlohmann::json& j);

}  // namespace idecomp
