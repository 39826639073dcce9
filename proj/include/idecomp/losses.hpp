#pragma once

#include <optional>
#include <span>
#include <vector>

#include "idecomp/autodiff.hpp"
#include "idecomp/model.hpp"
#include "idecomp/pointcloud.hpp"
#include "idecomp/rng.hpp"

namespace idecomp {

enum class ContrastKind { kNone, kPca, kIca };
enum class Nonlinearity { kTanh, kCubic, kIdentity };

/// Which statistical property the activations are pushed towards.
struct ContrastSpec {
  ContrastKind kind = ContrastKind::kPca;
  Nonlinearity phi = Nonlinearity::kTanh;  // ica only
  std::vector<double> lambda;              // target diagonal; empty = all ones
  double beta = 1.0;
  double ortho_weight = 0.0;

  std::vector<double> lambda_for(std::size_t k) const;
};

void validate(const ContrastSpec& spec, std::size_t k);

/// Added under the square root of the contrast norm so that its gradient
/// stays finite at an exact optimum; sqrt(kNormEpsilon) = 1e-12.
inline constexpr double kNormEpsilon = 1e-24;

/// Batch moments of the k x B activation matrix S.
struct BatchStats {
  NodeId s;
  NodeId mu;                        // k x 1, mean of S
  std::optional<NodeId> phi_s;      // phi(S)
  std::optional<NodeId> mu_tilde;   // k x 1, mean of phi(S)
  std::size_t batch = 0;
};

BatchStats batch_stats(Tape& tape, NodeId s,
                       std::optional<Nonlinearity> phi = std::nullopt);

NodeId apply_nonlinearity(Tape& tape, NodeId x, Nonlinearity phi);

/// || (1/B) (S - mu)(S - mu)^T - diag(lambda) ||_F
NodeId contrast_pca(Tape& tape, const BatchStats& stats,
                    std::span<const double> lambda);
/// || (1/B) (phi(S) - mu~)(S - mu)^T - diag(lambda) ||_F
NodeId contrast_ica(Tape& tape, const BatchStats& stats,
                    std::span<const double> lambda);

/// mean((targets - prediction)^2) for 1 x B nodes/values.
NodeId reconstruction_loss(Tape& tape, NodeId prediction, const Matrix& targets);
NodeId reconstruction_loss(TapeModel& model, std::span<const Sample> batch);

/// sum_{i<j} (mean_p f_i(p) f_j(p))^2 for a k x P matrix of basis values.
NodeId basis_orthogonality_penalty(Tape& tape, NodeId bases);
NodeId basis_orthogonality_penalty(TapeModel& model,
                                   const std::vector<std::vector<double>>& xi_probe);

/// Fourier features and time bookkeeping for a whole dataset, computed once
/// so that batches only gather columns.
struct EncodedDataset {
  Matrix targets;                             // 1 x N
  std::vector<std::size_t> time_slot;         // per sample
  std::vector<double> slot_times;             // distinct normalized times
  std::vector<Eigen::Index> slot_column;      // discrete: activation column
  std::vector<Matrix> basis_features;         // per basis net, enc x N
  std::vector<Matrix> activation_features;    // per activation net, enc x U

  std::size_t size() const { return static_cast<std::size_t>(targets.cols()); }
};

EncodedDataset encode_dataset(const DecompositionModel& model,
                              const PointCloudDataset& ds);
EncodedDataset encode_samples(const DecompositionModel& model,
                              std::span<const Sample> samples);

struct LossTerms {
  NodeId total;
  NodeId reconstruction;
  std::optional<NodeId> contrast;
  std::optional<NodeId> ortho;
};

/// reconstruction + beta * contrast + ortho_weight * orthogonality penalty.
/// The contrast uses the batch's distinct time points; when there are fewer
/// than two, `fresh` supplies uniformly drawn times instead.
LossTerms total_loss(TapeModel& model, const EncodedDataset& data,
                     std::span<const std::size_t> batch,
                     const ContrastSpec& spec, Rng* fresh = nullptr);
LossTerms total_loss(TapeModel& model, std::span<const Sample> batch,
                     const ContrastSpec& spec);

}  // namespace idecomp
