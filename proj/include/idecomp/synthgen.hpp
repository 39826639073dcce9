#pragma once

// Deterministic synthetic datasets with known sources and bases.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "idecomp/autodiff.hpp"
#include "idecomp/pointcloud.hpp"

namespace idecomp {

/// Closed-form S_n(t) and f_n(xi), both over normalized coordinates.
struct GroundTruth {
  std::size_t k = 0;
  std::vector<std::function<double(double)>> sources;
  std::vector<std::function<double(std::span<const double>)>> bases;

  double value(double t, std::span<const double> xi) const;
};

struct GeneratedData {
  PointCloudDataset dataset;  // normalized
  GroundTruth truth;
  nlohmann::json generator;   // parameters recorded in the manifest
};

/// g(x, y) = y^2 sin(3x) + y^3 sin(2x) on x in [0, 2 pi] (process time) and
/// y in [-1, 1]. `regular` gives a floor(sqrt(n)) x floor(sqrt(n)) lattice.
GeneratedData gen_fig1(std::size_t n_points, bool regular, std::uint64_t seed);

/// k note-like sources (raised-cosine bump trains, first played one at a
/// time, then overlapping) times multi-peak spectral envelopes, sampled on a
/// constant-Q-like cloud: geometric xi levels, coarser time hops at low xi.
GeneratedData gen_independent_sources(std::size_t k, std::size_t n_t,
                                      std::size_t n_xi, double irregular_fraction,
                                      std::uint64_t seed);

/// Images that are non-negative combinations of k_true smooth basis images;
/// pixels are emitted as (image index, (x, y), value) in discrete time mode.
GeneratedData gen_lowrank_images(std::size_t n_images, std::size_t height,
                                 std::size_t width, std::size_t k_true,
                                 std::uint64_t seed);

/// Pearson correlation of two equally long sequences.
double pearson(std::span<const double> a, std::span<const double> b);

/// Dense sampling of a ground truth for evaluation and export.
struct SampledTruth {
  std::vector<double> t_grid;
  std::vector<std::vector<double>> xi_grid;
  Matrix sources;  // k x |t_grid|
  Matrix bases;    // k x |xi_grid|
};

SampledTruth sample_truth(const GroundTruth& truth, std::vector<double> t_grid,
                          std::vector<std::vector<double>> xi_grid);

nlohmann::json to_json(const SampledTruth& truth);
SampledTruth sampled_truth_from_json(const nlohmann::json& j);

/// n uniform points on [0, 1] (endpoints included).
std::vector<double> uniform_grid(std::size_t n);
/// Lattice with n points per axis over [0, 1]^d, first axis outermost.
std::vector<std::vector<double>> uniform_lattice(std::size_t n, std::size_t d);

}  // namespace idecomp
