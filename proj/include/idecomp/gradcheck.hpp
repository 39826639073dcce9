#pragma once

// Finite-difference verification of total_loss gradients on small random
// models.

#include <cstdint>
#include <vector>

#include "idecomp/losses.hpp"
#include "idecomp/model.hpp"
#include "idecomp/rng.hpp"

namespace idecomp {

struct GradcheckCase {
  ModelConfig model;
  ContrastSpec contrast;
  std::uint64_t model_seed = 0;
  std::vector<Sample> batch;  // normalized coordinates
};

/// Small random model, contrast and batch. Cycles through the contrast kinds
/// with `index` so that a suite covers PCA, ICA (tanh and cubic) and none.
GradcheckCase random_gradcheck_case(Rng& rng, std::size_t index);

struct GradcheckOutcome {
  double max_rel_error = 0.0;
  double kink_distance = 0.0;  // smallest |prelu input| at the base point
  std::size_t entries = 0;
};

/// Central differences with step h over every parameter entry of the case's
/// freshly initialized model.
GradcheckOutcome check_gradients(const GradcheckCase& c, double h);
/// Same for an existing model and batch.
GradcheckOutcome check_gradients(const DecompositionModel& model,
                                 const std::vector<Sample>& batch,
                                 const ContrastSpec& contrast, double h,
                                 std::size_t max_entries = 0,
                                 std::uint64_t entry_seed = 0);

struct GradcheckSuite {
  std::size_t cases = 0;
  std::size_t resampled = 0;  // cases redrawn for sitting near a prelu kink
  double max_rel_error = 0.0;
  std::vector<double> errors;
};

/// `n` accepted random cases; a case whose prelu inputs come within
/// `kink_margin` of 0 is redrawn.
GradcheckSuite run_gradcheck_suite(std::size_t n, std::uint64_t seed, double h = 1e-6,
                                   double kink_margin = 1e-3);

}  // namespace idecomp
