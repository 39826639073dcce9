#pragma once

// Closed-form linear-algebra baselines used as ground truth.

#include <span>
#include <vector>

#include "idecomp/autodiff.hpp"

namespace idecomp {

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values(i); largest |entry| positive
  int sweeps = 0;
};

/// Cyclic-by-rows Jacobi rotations. Stops once the off-diagonal Frobenius
/// mass is <= 1e-14 * ||A||_F; gives up after 100 sweeps.
EigenDecomposition jacobi_eigh(const Matrix& a);

struct PcaResult {
  Matrix components;   // N_xi x k, orthonormal columns
  Matrix scores;       // N_t x k
  Vector mean;         // N_xi, column means over t
  Vector eigenvalues;  // all eigenvalues of the xi covariance, descending
  std::vector<double> explained_variance_ratio;  // cumulative, per rank 1..k

  /// Rank-k reconstruction of the N_t x N_xi table.
  Matrix reconstruct() const;
};

/// Classical PCA of an N_t x N_xi table (rows are time samples).
PcaResult exact_pca(const Matrix& grid, std::size_t k);

/// 1 - sum (x - x_hat)^2 / sum (x - mean x)^2.
double explained_variance(std::span<const double> values,
                          std::span<const double> predictions);

}  // namespace idecomp
