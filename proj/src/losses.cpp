#include "idecomp/losses.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "idecomp/error.hpp"

namespace idecomp {
namespace {

Matrix diag_matrix(std::span<const double> lambda) {
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(lambda.size()),
                          static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = lambda[i];
  }
  return d;
}

NodeId frobenius_norm(Tape& tape, NodeId residual) {
  return tape.sqrt(tape.add_scalar(tape.frobenius_sq(residual), kNormEpsilon));
}

NodeId cross_moment_residual(Tape& tape, NodeId left_centered,
                             NodeId right_centered, std::size_t batch,
                             std::span<const double> lambda) {
  const Eigen::Index k = tape.value(left_centered).rows();
  if (static_cast<std::size_t>(k) != lambda.size()) {
    throw ShapeError("contrast: lambda has " + std::to_string(lambda.size()) +
                     " entries for " + std::to_string(k) + " components");
  }
  const NodeId moment = tape.scale(
      tape.matmul(left_centered, tape.transpose(right_centered)),
      1.0 / double(batch));
  return tape.sub(moment, tape.constant(diag_matrix(lambda)));
}

/// Column sums of a k x B node as a 1 x B node.
NodeId column_sum(Tape& tape, NodeId x) {
  const Eigen::Index k = tape.value(x).rows();
  return tape.matmul(tape.constant(Matrix::Ones(1, k)), x);
}

Matrix gather(const Matrix& m, std::span<const std::size_t> cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  }
  return out;
}

}  // namespace

std::vector<double> ContrastSpec::lambda_for(std::size_t k) const {
  if (lambda.empty()) return std::vector<double>(k, 1.0);
  if (lambda.size() != k) {
    throw ConfigError("lambda has " + std::to_string(lambda.size()) +
                      " entries, expected " + std::to_string(k));
  }
  return lambda;
}

void validate(const ContrastSpec& spec, std::size_t k) {
  std::vector<std::string> problems;
  if (!(spec.beta >= 0.0)) problems.push_back("beta must be >= 0");
  if (!(spec.ortho_weight >= 0.0)) problems.push_back("ortho_weight must be >= 0");
  if (!spec.lambda.empty() && spec.lambda.size() != k) {
    problems.push_back("lambda must have k = " + std::to_string(k) + " entries");
  } else {
    for (double l : spec.lambda_for(k)) {
      if (!(l > 0.0)) {
        problems.push_back("lambda entries must be > 0");
        break;
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid contrast:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

NodeId apply_nonlinearity(Tape& tape, NodeId x, Nonlinearity phi) {
  switch (phi) {
    case Nonlinearity::kTanh:
      return tape.tanh(x);
    case Nonlinearity::kCubic:
      return tape.cube(x);
    case Nonlinearity::kIdentity:
      return x;
  }
  return x;
}

BatchStats batch_stats(Tape& tape, NodeId s, std::optional<Nonlinearity> phi) {
  BatchStats stats;
  stats.s = s;
  stats.batch = static_cast<std::size_t>(tape.value(s).cols());
  if (stats.batch < 2) {
    throw ShapeError("batch statistics need at least 2 time samples");
  }
  stats.mu = tape.row_mean(s);
  if (phi) {
    stats.phi_s = apply_nonlinearity(tape, s, *phi);
    stats.mu_tilde = tape.row_mean(*stats.phi_s);
  }
  return stats;
}

NodeId contrast_pca(Tape& tape, const BatchStats& stats,
                    std::span<const double> lambda) {
  const NodeId centered = tape.sub_col(stats.s, stats.mu);
  return frobenius_norm(
      tape, cross_moment_residual(tape, centered, centered, stats.batch, lambda));
}

NodeId contrast_ica(Tape& tape, const BatchStats& stats,
                    std::span<const double> lambda) {
  if (!stats.phi_s || !stats.mu_tilde) {
    throw Error("contrast_ica: batch statistics were built without phi");
  }
  const NodeId centered = tape.sub_col(stats.s, stats.mu);
  const NodeId phi_centered = tape.sub_col(*stats.phi_s, *stats.mu_tilde);
  return frobenius_norm(tape, cross_moment_residual(tape, phi_centered, centered,
                                                    stats.batch, lambda));
}

NodeId reconstruction_loss(Tape& tape, NodeId prediction, const Matrix& targets) {
  return tape.mean(tape.square(tape.sub(tape.constant(targets), prediction)));
}

NodeId reconstruction_loss(TapeModel& model, std::span<const Sample> batch) {
  if (batch.empty()) throw EmptyDatasetError("reconstruction_loss: empty batch");
  const EncodedDataset data = encode_samples(model.model(), batch);
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  ContrastSpec none;
  none.kind = ContrastKind::kNone;
  return total_loss(model, data, all, none).reconstruction;
}

NodeId basis_orthogonality_penalty(Tape& tape, NodeId bases) {
  const Matrix& f = tape.value(bases);
  const Eigen::Index k = f.rows();
  if (f.cols() < 2) throw ShapeError("orthogonality penalty needs >= 2 probes");
  if (k < 2) return tape.constant(0.0);
  const NodeId gram = tape.scale(tape.matmul(bases, tape.transpose(bases)),
                                 1.0 / double(f.cols()));
  Matrix upper = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) upper(i, j) = 1.0;
  }
  return tape.frobenius_sq(tape.mul(gram, tape.constant(upper)));
}

NodeId basis_orthogonality_penalty(TapeModel& model,
                                   const std::vector<std::vector<double>>& xi_probe) {
  const auto d = static_cast<Eigen::Index>(model.model().config.xi_dim);
  Matrix xi(d, static_cast<Eigen::Index>(xi_probe.size()));
  for (std::size_t c = 0; c < xi_probe.size(); ++c) {
    check_domain(model.model(), 0.0, xi_probe[c]);
    for (Eigen::Index j = 0; j < d; ++j) {
      xi(j, static_cast<Eigen::Index>(c)) = xi_probe[c][static_cast<std::size_t>(j)];
    }
  }
  return basis_orthogonality_penalty(model.tape(), model.bases(xi));
}

EncodedDataset encode_samples(const DecompositionModel& model,
                              std::span<const Sample> samples) {
  const std::size_t n = samples.size();
  const auto d = static_cast<Eigen::Index>(model.config.xi_dim);
  const bool discrete = model.activation_matrix.has_value();

  EncodedDataset out;
  out.targets.resize(1, static_cast<Eigen::Index>(n));
  out.time_slot.resize(n);
  Matrix xi(d, static_cast<Eigen::Index>(n));

  std::map<double, std::size_t> slot_of;  // keyed by time or by column
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[i];
    check_domain(model, s.t, s.xi);
    out.targets(0, static_cast<Eigen::Index>(i)) = s.value;
    for (Eigen::Index j = 0; j < d; ++j) {
      xi(j, static_cast<Eigen::Index>(i)) = s.xi[static_cast<std::size_t>(j)];
    }
    const double key =
        discrete ? double(activation_column(model, s.t)) : s.t;
    slot_of.emplace(key, 0);
  }
  std::size_t next = 0;
  for (auto& [key, slot] : slot_of) {
    slot = next++;
    if (discrete) {
      out.slot_column.push_back(static_cast<Eigen::Index>(key));
      out.slot_times.push_back(
          model.config.n_times > 1 ? key / double(model.config.n_times - 1) : 0.5);
    } else {
      out.slot_times.push_back(key);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[i];
    const double key = discrete ? double(activation_column(model, s.t)) : s.t;
    out.time_slot[i] = slot_of.at(key);
  }

  for (const Mlp& net : model.basis_nets) {
    out.basis_features.push_back(net.encoding.encode_columns(xi));
  }
  if (!discrete) {
    Matrix t(1, static_cast<Eigen::Index>(out.slot_times.size()));
    for (std::size_t u = 0; u < out.slot_times.size(); ++u) {
      t(0, static_cast<Eigen::Index>(u)) = out.slot_times[u];
    }
    for (const Mlp& net : model.activation_nets) {
      out.activation_features.push_back(net.encoding.encode_columns(t));
    }
  }
  return out;
}

EncodedDataset encode_dataset(const DecompositionModel& model,
                              const PointCloudDataset& ds) {
  if (ds.xi_dim != model.config.xi_dim) {
    throw SchemaError("model xi_dim " + std::to_string(model.config.xi_dim) +
                      " does not match dataset xi_dim " +
                      std::to_string(ds.xi_dim));
  }
  return encode_samples(model, ds.samples);
}

namespace {

/// k x U activations for the given time slots.
NodeId slot_activations(TapeModel& bound, const EncodedDataset& data,
                        std::span<const std::size_t> slots) {
  const DecompositionModel& model = bound.model();
  Tape& tape = bound.tape();
  if (model.activation_matrix) {
    std::vector<Eigen::Index> cols;
    cols.reserve(slots.size());
    for (std::size_t s : slots) cols.push_back(data.slot_column[s]);
    return tape.gather_cols(bound.param(*model.activation_matrix), std::move(cols));
  }
  std::vector<NodeId> rows;
  rows.reserve(model.activation_nets.size());
  for (std::size_t n = 0; n < model.activation_nets.size(); ++n) {
    const NodeId features =
        tape.constant(gather(data.activation_features[n], slots));
    rows.push_back(bound.mlp(model.activation_nets[n], features));
  }
  return tape.vstack(rows);
}

/// k x B activations at fresh uniform times (used when a batch has < 2
/// distinct times).
NodeId fresh_activations(TapeModel& bound, std::size_t count, Rng& rng) {
  const DecompositionModel& model = bound.model();
  std::vector<double> t(count);
  if (model.activation_matrix) {
    const std::size_t n = model.config.n_times;
    for (double& v : t) {
      v = n > 1 ? double(rng.index(n)) / double(n - 1) : 0.5;
    }
  } else {
    for (double& v : t) v = rng.uniform(0.0, 1.0);
  }
  return bound.activations(t);
}

}  // namespace

LossTerms total_loss(TapeModel& bound, const EncodedDataset& data,
                     std::span<const std::size_t> batch,
                     const ContrastSpec& spec, Rng* fresh) {
  if (batch.empty()) throw EmptyDatasetError("total_loss: empty batch");
  const DecompositionModel& model = bound.model();
  Tape& tape = bound.tape();
  validate(spec, model.k());

  // Basis values at the batch's xi points.
  std::vector<NodeId> rows;
  rows.reserve(model.basis_nets.size());
  for (std::size_t n = 0; n < model.basis_nets.size(); ++n) {
    const NodeId features = tape.constant(gather(data.basis_features[n], batch));
    rows.push_back(bound.mlp(model.basis_nets[n], features));
  }
  const NodeId bases = tape.vstack(rows);

  // Activations evaluated once per distinct time in the batch.
  std::vector<std::size_t> slots;
  std::map<std::size_t, std::size_t> local;
  std::vector<Eigen::Index> sample_cols;
  sample_cols.reserve(batch.size());
  for (std::size_t i : batch) {
    const std::size_t slot = data.time_slot[i];
    auto [it, inserted] = local.emplace(slot, slots.size());
    if (inserted) slots.push_back(slot);
    sample_cols.push_back(static_cast<Eigen::Index>(it->second));
  }
  const NodeId slot_act = slot_activations(bound, data, slots);
  const NodeId act = tape.gather_cols(slot_act, std::move(sample_cols));

  const NodeId prediction = column_sum(tape, tape.mul(act, bases));
  LossTerms terms;
  terms.reconstruction =
      reconstruction_loss(tape, prediction, gather(data.targets, batch));
  terms.total = terms.reconstruction;

  if (spec.kind != ContrastKind::kNone && spec.beta > 0.0) {
    NodeId s = slot_act;
    if (slots.size() < 2) {
      if (fresh == nullptr) {
        throw ShapeError("contrast needs >= 2 distinct times in the batch");
      }
      s = fresh_activations(bound, std::max<std::size_t>(batch.size(), 2), *fresh);
    }
    const std::vector<double> lambda = spec.lambda_for(model.k());
    if (spec.kind == ContrastKind::kPca) {
      terms.contrast = contrast_pca(tape, batch_stats(tape, s), lambda);
    } else {
      terms.contrast = contrast_ica(tape, batch_stats(tape, s, spec.phi), lambda);
    }
    terms.total = tape.add(terms.total, tape.scale(*terms.contrast, spec.beta));
  }

  if (spec.ortho_weight > 0.0) {
    terms.ortho = basis_orthogonality_penalty(tape, bases);
    terms.total = tape.add(terms.total, tape.scale(*terms.ortho, spec.ortho_weight));
  }
  return terms;
}

LossTerms total_loss(TapeModel& bound, std::span<const Sample> batch,
                     const ContrastSpec& spec) {
  const EncodedDataset data = encode_samples(bound.model(), batch);
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return total_loss(bound, data, all, spec);
}

}  // namespace idecomp
