#include "idecomp/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "idecomp/error.hpp"
#include "idecomp/rng.hpp"

namespace idecomp {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDomainSlack = 1e-12;

Mlp make_mlp(std::vector<Matrix>& params, FourierEncoding encoding,
             const std::vector<std::size_t>& widths, Rng& rng) {
  Mlp net;
  std::size_t fan_in = encoding.output_dim();
  net.encoding = std::move(encoding);
  std::vector<std::size_t> dims = widths;
  dims.push_back(1);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const double bound = std::sqrt(1.0 / double(fan_in));
    Matrix w(dims[l], fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-bound, bound);
    LayerParams layer;
    layer.weight = params.size();
    params.push_back(std::move(w));
    layer.bias = params.size();
    params.push_back(Matrix::Zero(dims[l], 1));
    if (l + 1 < dims.size()) {
      layer.slope = params.size();
      params.push_back(Matrix::Constant(1, 1, 0.25));
    }
    net.layers.push_back(layer);
    fan_in = dims[l];
  }
  return net;
}

FourierEncoding draw_encoding(const EncodingConfig& cfg, std::size_t dim,
                              Rng& rng) {
  Matrix b(cfg.enabled ? cfg.frequencies : 0, dim);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.normal(0.0, cfg.sigma);
  return make_encoding(std::move(b), cfg.sigma, cfg.include_raw, cfg.enabled);
}

}  // namespace

std::size_t FourierEncoding::output_dim() const {
  const std::size_t raw = (include_raw || !enabled) ? input_dim() : 0;
  return raw + (enabled ? 2 * static_cast<std::size_t>(frequencies.rows()) : 0);
}

Matrix FourierEncoding::encode_columns(const Matrix& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw ShapeError("encoding expects " + std::to_string(input_dim()) +
                     "-dimensional input, got " + std::to_string(x.rows()));
  }
  const Eigen::Index raw = (include_raw || !enabled) ? x.rows() : 0;
  Matrix out(static_cast<Eigen::Index>(output_dim()), x.cols());
  if (raw > 0) out.topRows(raw) = x;
  if (enabled) {
    const Matrix phase = kTwoPi * (frequencies * x);
    for (Eigen::Index f = 0; f < phase.rows(); ++f) {
      out.row(raw + 2 * f) = phase.row(f).array().sin();
      out.row(raw + 2 * f + 1) = phase.row(f).array().cos();
    }
  }
  return out;
}

FourierEncoding make_encoding(Matrix frequencies, double sigma, bool include_raw,
                              bool enabled) {
  FourierEncoding enc;
  enc.frequencies = std::move(frequencies);
  enc.sigma = sigma;
  enc.include_raw = include_raw;
  enc.enabled = enabled;
  return enc;
}

Vector encode(const FourierEncoding& enc, std::span<const double> x) {
  Matrix col(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw DomainError("encode: non-finite input");
    col(static_cast<Eigen::Index>(i), 0) = x[i];
  }
  return enc.encode_columns(col).col(0);
}

void validate(const ModelConfig& c) {
  std::vector<std::string> problems;
  if (c.k < 1) problems.push_back("k must be >= 1");
  if (c.xi_dim < 1) problems.push_back("xi_dim must be >= 1");
  if (c.widths.empty()) problems.push_back("widths must not be empty");
  for (std::size_t w : c.widths) {
    if (w < 1) problems.push_back("widths must be >= 1");
  }
  for (const auto* e : {&c.xi_encoding, &c.t_encoding}) {
    if (e->enabled && e->frequencies < 1) {
      problems.push_back("encoding frequencies must be >= 1");
    }
    if (e->enabled && !(e->sigma > 0.0)) {
      problems.push_back("encoding sigma must be > 0");
    }
  }
  if (c.activation_mode == ActivationMode::kDiscrete && c.n_times < 1) {
    problems.push_back("discrete activations need n_times >= 1");
  }
  if (!(c.discrete_init_bound >= 0.0)) {
    problems.push_back("discrete_init_bound must be >= 0");
  }
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

std::size_t DecompositionModel::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& p : params) n += static_cast<std::size_t>(p.size());
  return n;
}

DecompositionModel init_model(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  DecompositionModel model;
  model.config = config;
  model.seed = seed;
  Rng rng(seed);
  for (std::size_t n = 0; n < config.k; ++n) {
    FourierEncoding enc = draw_encoding(config.xi_encoding, config.xi_dim, rng);
    model.basis_nets.push_back(
        make_mlp(model.params, std::move(enc), config.widths, rng));
  }
  if (config.activation_mode == ActivationMode::kNeural) {
    for (std::size_t n = 0; n < config.k; ++n) {
      FourierEncoding enc = draw_encoding(config.t_encoding, 1, rng);
      model.activation_nets.push_back(
          make_mlp(model.params, std::move(enc), config.widths, rng));
    }
  } else {
    const double bound = config.discrete_init_bound;
    Matrix a(config.k, config.n_times);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(-bound, bound);
    model.activation_matrix = model.params.size();
    model.params.push_back(std::move(a));
  }
  return model;
}

void check_domain(const DecompositionModel& model, double t,
                  std::span<const double> xi) {
  if (xi.size() != model.config.xi_dim) {
    throw ShapeError("expected " + std::to_string(model.config.xi_dim) +
                     "-dimensional xi, got " + std::to_string(xi.size()));
  }
  if (model.config.allow_extrapolation) return;
  auto inside = [](double v) {
    return v >= -kDomainSlack && v <= 1.0 + kDomainSlack;
  };
  bool ok = inside(t);
  for (double x : xi) ok = ok && inside(x);
  if (!ok) {
    throw DomainError("coordinate outside [0, 1]; extrapolation is disabled");
  }
}

namespace {

void check_time(const DecompositionModel& model, double t) {
  if (!std::isfinite(t)) throw DomainError("non-finite time coordinate");
  if (model.config.allow_extrapolation) return;
  if (t < -kDomainSlack || t > 1.0 + kDomainSlack) {
    throw DomainError("time coordinate outside [0, 1]; extrapolation is disabled");
  }
}

}  // namespace

std::size_t activation_column(const DecompositionModel& model, double t) {
  const std::size_t n = model.config.n_times;
  if (n <= 1) return 0;
  const double pos = std::round(t * double(n - 1));
  if (pos < 0.0 || pos > double(n - 1)) {
    throw DomainError("time coordinate outside the activation matrix");
  }
  return static_cast<std::size_t>(pos);
}

namespace {

Matrix row_matrix(std::span<const double> t) {
  Matrix m(1, static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = t[i];
  return m;
}

}  // namespace

TapeModel::TapeModel(const DecompositionModel& model, Tape& tape)
    : model_(model), tape_(tape) {
  params_.reserve(model.params.size());
  for (const Matrix& p : model.params) params_.push_back(tape.parameter(p));
}

TapeModel::TapeModel(const DecompositionModel& model, Tape& tape,
                     std::span<const NodeId> params)
    : model_(model), tape_(tape), params_(params.begin(), params.end()) {
  if (params_.size() != model.params.size()) {
    throw ShapeError("TapeModel: expected " + std::to_string(model.params.size()) +
                     " parameter nodes, got " + std::to_string(params_.size()));
  }
}

NodeId TapeModel::mlp(const Mlp& net, NodeId features) {
  NodeId h = features;
  for (const LayerParams& layer : net.layers) {
    h = tape_.affine(params_[layer.weight], h, params_[layer.bias]);
    if (layer.slope) h = tape_.prelu(h, params_[*layer.slope]);
  }
  return h;
}

NodeId TapeModel::bases(const Matrix& xi) {
  std::vector<NodeId> rows;
  rows.reserve(model_.basis_nets.size());
  for (const Mlp& net : model_.basis_nets) {
    rows.push_back(mlp(net, tape_.constant(net.encoding.encode_columns(xi))));
  }
  return tape_.vstack(rows);
}

NodeId TapeModel::activations(std::span<const double> t) {
  for (double v : t) check_time(model_, v);
  if (model_.activation_matrix) {
    std::vector<Eigen::Index> cols;
    cols.reserve(t.size());
    for (double v : t) {
      cols.push_back(static_cast<Eigen::Index>(activation_column(model_, v)));
    }
    return tape_.gather_cols(params_[*model_.activation_matrix], std::move(cols));
  }
  const Matrix tm = row_matrix(t);
  std::vector<NodeId> rows;
  rows.reserve(model_.activation_nets.size());
  for (const Mlp& net : model_.activation_nets) {
    rows.push_back(mlp(net, tape_.constant(net.encoding.encode_columns(tm))));
  }
  return tape_.vstack(rows);
}

NodeId TapeModel::predict(double t, std::span<const double> xi) {
  check_domain(model_, t, xi);
  Matrix col(static_cast<Eigen::Index>(xi.size()), 1);
  for (std::size_t j = 0; j < xi.size(); ++j) col(static_cast<Eigen::Index>(j), 0) = xi[j];
  const double tv[1] = {t};
  const NodeId h = activations(tv);
  const NodeId f = bases(col);
  return tape_.sum(tape_.mul(h, f));
}

NodeId predict(const DecompositionModel& model, double t,
               std::span<const double> xi, Tape& tape) {
  TapeModel bound(model, tape);
  return bound.predict(t, xi);
}

Matrix eval_mlp(const DecompositionModel& model, const Mlp& net,
                const Matrix& features) {
  Matrix h = features;
  for (const LayerParams& layer : net.layers) {
    Matrix next = model.params[layer.weight] * h;
    next.colwise() += model.params[layer.bias].col(0);
    if (layer.slope) {
      const double a = model.params[*layer.slope](0, 0);
      next = next.unaryExpr([a](double v) { return v >= 0.0 ? v : a * v; });
    }
    h = std::move(next);
  }
  return h;
}

Matrix sample_bases(const DecompositionModel& model,
                    const std::vector<std::vector<double>>& xi_grid) {
  const auto g = static_cast<Eigen::Index>(xi_grid.size());
  Matrix xi(static_cast<Eigen::Index>(model.config.xi_dim), g);
  for (Eigen::Index c = 0; c < g; ++c) {
    const auto& p = xi_grid[static_cast<std::size_t>(c)];
    check_domain(model, 0.0, p);
    for (Eigen::Index j = 0; j < xi.rows(); ++j) xi(j, c) = p[static_cast<std::size_t>(j)];
  }
  Matrix out(static_cast<Eigen::Index>(model.k()), g);
  for (std::size_t n = 0; n < model.basis_nets.size(); ++n) {
    const Mlp& net = model.basis_nets[n];
    out.row(static_cast<Eigen::Index>(n)) =
        eval_mlp(model, net, net.encoding.encode_columns(xi)).row(0);
  }
  return out;
}

Matrix sample_activations(const DecompositionModel& model,
                          const std::vector<double>& t_grid) {
  for (double t : t_grid) check_time(model, t);
  const auto g = static_cast<Eigen::Index>(t_grid.size());
  Matrix out(static_cast<Eigen::Index>(model.k()), g);
  if (model.activation_matrix) {
    const Matrix& a = model.params[*model.activation_matrix];
    for (Eigen::Index c = 0; c < g; ++c) {
      out.col(c) = a.col(static_cast<Eigen::Index>(
          activation_column(model, t_grid[static_cast<std::size_t>(c)])));
    }
    return out;
  }
  const Matrix tm = row_matrix(t_grid);
  for (std::size_t n = 0; n < model.activation_nets.size(); ++n) {
    const Mlp& net = model.activation_nets[n];
    out.row(static_cast<Eigen::Index>(n)) =
        eval_mlp(model, net, net.encoding.encode_columns(tm)).row(0);
  }
  return out;
}

Vector predict_dataset(const DecompositionModel& model,
                       const PointCloudDataset& ds) {
  if (ds.xi_dim != model.config.xi_dim) {
    throw SchemaError("model xi_dim " + std::to_string(model.config.xi_dim) +
                      " does not match dataset xi_dim " +
                      std::to_string(ds.xi_dim));
  }
  std::vector<double> t;
  std::vector<std::vector<double>> xi;
  t.reserve(ds.size());
  xi.reserve(ds.size());
  for (const Sample& s : ds.samples) {
    t.push_back(s.t);
    xi.push_back(s.xi);
  }
  const Matrix h = sample_activations(model, t);
  const Matrix f = sample_bases(model, xi);
  return (h.array() * f.array()).colwise().sum().transpose();
}

}  // namespace idecomp
