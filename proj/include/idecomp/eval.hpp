#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "idecomp/model.hpp"
#include "idecomp/pointcloud.hpp"
#include "idecomp/synthgen.hpp"

namespace idecomp {

/// Population covariance of the k activations sampled at t_points.
Matrix activation_covariance(const DecompositionModel& model,
                             const std::vector<double>& t_points);

/// max |off-diagonal| / min diagonal; 0 for a 1x1 matrix.
double offdiag_ratio(const Matrix& covariance);

struct MatchResult {
  /// permutation[i] is the estimated row matched to truth row i.
  std::vector<std::size_t> permutation;
  std::vector<int> signs;                           // sign of the matched correlation
  std::vector<std::vector<double>> correlations;    // per table pair, per truth row
  std::vector<double> mean;                         // per table pair
};

/// Pairs of (estimated, truth) k x G tables matched with one shared
/// permutation that maximizes the summed |Pearson correlation|. Exhaustive
/// over k! permutations for k <= 8; `greedy` picks the best remaining pair
/// repeatedly instead.
MatchResult match_sources_joint(const std::vector<std::pair<Matrix, Matrix>>& tables,
                                bool greedy = false);
MatchResult match_sources(const Matrix& estimated, const Matrix& truth,
                          bool greedy = false);

struct EvalReport {
  double reconstruction_mse = 0.0;
  double explained_variance = 0.0;
  Matrix activation_covariance;
  double offdiag_ratio = 0.0;

  struct Matching {
    std::vector<std::size_t> permutation;
    std::vector<int> signs;
    std::vector<double> activation_correlation;
    std::vector<double> basis_correlation;
    double mean_activation_correlation = 0.0;
    double mean_basis_correlation = 0.0;
  };
  std::optional<Matching> matching;
};

/// Reconstruction quality on `ds`, activation statistics over `t_grid`
/// (discrete models use every index when empty), and, with a truth, joint
/// source/basis matching on the truth's grids (greedy for k > 8).
EvalReport evaluate(const DecompositionModel& model, const PointCloudDataset& ds,
                    const SampledTruth* truth, std::vector<double> t_grid);

nlohmann::json to_json(const EvalReport& report);

}  // namespace idecomp
