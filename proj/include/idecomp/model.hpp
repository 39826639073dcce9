#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "idecomp/autodiff.hpp"
#include "idecomp/pointcloud.hpp"

namespace idecomp {

/// Random Fourier features: [x (optional), sin(2 pi B x)_1, cos(2 pi B x)_1, ...].
struct EncodingConfig {
  bool enabled = true;
  std::size_t frequencies = 64;
  double sigma = 10.0;
  bool include_raw = true;
};

struct FourierEncoding {
  bool enabled = true;
  bool include_raw = true;
  double sigma = 1.0;
  Matrix frequencies;  // m x d, fixed after construction

  std::size_t input_dim() const { return static_cast<std::size_t>(frequencies.cols()); }
  std::size_t output_dim() const;

  /// Encodes the columns of x (d x B) into an output_dim() x B matrix.
  Matrix encode_columns(const Matrix& x) const;
};

FourierEncoding make_encoding(Matrix frequencies, double sigma, bool include_raw,
                              bool enabled = true);
Vector encode(const FourierEncoding& enc, std::span<const double> x);

enum class ActivationMode { kNeural, kDiscrete };

struct ModelConfig {
  std::size_t k = 2;
  std::size_t xi_dim = 1;
  std::vector<std::size_t> widths{64, 64, 64};
  EncodingConfig xi_encoding{true, 64, 10.0, true};
  EncodingConfig t_encoding{true, 64, 3.0, true};
  ActivationMode activation_mode = ActivationMode::kNeural;
  std::size_t n_times = 0;  // columns of the activation matrix (discrete mode)
  double discrete_init_bound = 0.1;
  bool allow_extrapolation = false;
};

void validate(const ModelConfig& config);

/// Indices into DecompositionModel::params.
struct LayerParams {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::optional<std::size_t> slope;  // hidden layers only
};

struct Mlp {
  FourierEncoding encoding;
  std::vector<LayerParams> layers;
};

/// k basis networks over xi and k activation signals over t, combined as
/// x_hat(t, xi) = sum_n H_n(t) f_n(xi).
struct DecompositionModel {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::vector<Matrix> params;
  std::vector<Mlp> basis_nets;
  std::vector<Mlp> activation_nets;          // neural mode
  std::optional<std::size_t> activation_matrix;  // discrete mode, k x n_times
  std::optional<NormalizationInfo> normalization;

  std::size_t k() const { return config.k; }
  std::size_t parameter_count() const;
};

DecompositionModel init_model(const ModelConfig& config, std::uint64_t seed);

/// Throws unless every coordinate is inside [0, 1] (or extrapolation is on).
void check_domain(const DecompositionModel& model, double t,
                  std::span<const double> xi);

/// Column of the discrete activation matrix for a normalized time.
std::size_t activation_column(const DecompositionModel& model, double t);

/// A model whose parameters have been placed on a tape.
class TapeModel {
 public:
  TapeModel(const DecompositionModel& model, Tape& tape);
  /// Uses parameter nodes already on the tape (one per model parameter).
  TapeModel(const DecompositionModel& model, Tape& tape,
            std::span<const NodeId> params);

  const DecompositionModel& model() const { return model_; }
  Tape& tape() { return tape_; }
  NodeId param(std::size_t i) const { return params_[i]; }
  std::span<const NodeId> params() const { return params_; }

  /// Network output (1 x B) for pre-encoded features (encoding dim x B).
  NodeId mlp(const Mlp& net, NodeId features);

  /// k x B basis values at the columns of xi (d x B).
  NodeId bases(const Matrix& xi);
  /// k x B activation values at normalized times.
  NodeId activations(std::span<const double> t);

  /// Scalar node x_hat(t, xi).
  NodeId predict(double t, std::span<const double> xi);

 private:
  const DecompositionModel& model_;
  Tape& tape_;
  std::vector<NodeId> params_;
};

NodeId predict(const DecompositionModel& model, double t,
               std::span<const double> xi, Tape& tape);

/// Tape-free evaluation of a single network on encoded columns.
Matrix eval_mlp(const DecompositionModel& model, const Mlp& net,
                const Matrix& features);

/// k x G tables; row n is component n. Grid points must lie in [0, 1].
Matrix sample_bases(const DecompositionModel& model,
                    const std::vector<std::vector<double>>& xi_grid);
Matrix sample_activations(const DecompositionModel& model,
                          const std::vector<double>& t_grid);

/// Tape-free x_hat for every sample of a normalized dataset.
Vector predict_dataset(const DecompositionModel& model,
                       const PointCloudDataset& ds);

}  // namespace idecomp
