#include "idecomp/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "idecomp/error.hpp"

namespace idecomp {
namespace {

std::atomic<std::uint32_t> next_tag{1};

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

void require_same_or_scalar(const Matrix& a, const Matrix& b, const char* op) {
  if (is_scalar(a) || is_scalar(b)) return;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a) +
                     " vs " + shape_of(b));
  }
}

// Broadcasting helpers: combine a and b elementwise when one is 1x1.
template <typename F>
Matrix broadcast(const Matrix& a, const Matrix& b, F f) {
  if (is_scalar(a) && !is_scalar(b)) {
    return b.unaryExpr([&](double y) { return f(a(0, 0), y); });
  }
  if (is_scalar(b) && !is_scalar(a)) {
    return a.unaryExpr([&](double x) { return f(x, b(0, 0)); });
  }
  return a.binaryExpr(b, f);
}

// Reduce an incoming gradient to the shape of an operand that was broadcast.
Matrix reduce_to(const Matrix& grad, const Matrix& operand) {
  if (is_scalar(operand) && !is_scalar(grad)) {
    return Matrix::Constant(1, 1, grad.sum());
  }
  return grad;
}

void accumulate(Matrix& slot, const Matrix& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

}  // namespace

Tape::Tape() : tag_(next_tag.fetch_add(1)) {}

std::uint32_t Tape::check(NodeId id) const {
  if (id.tape != tag_ || id.index >= nodes_.size()) {
    throw Error("node id does not belong to this tape");
  }
  return id.index;
}

NodeId Tape::push(Node node) {
  if (!node.value.allFinite()) {
    throw DomainError("non-finite value produced on tape at node " +
                      std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1), tag_};
}

NodeId Tape::constant(Matrix value) {
  Node n{Op::kConstant};
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::constant(double value) {
  return constant(Matrix::Constant(1, 1, value));
}

NodeId Tape::parameter(Matrix value) {
  Node n{Op::kParameter};
  n.value = std::move(value);
  NodeId id = push(std::move(n));
  parameters_.push_back(id.index);
  return id;
}

NodeId Tape::parameter(double value) {
  return parameter(Matrix::Constant(1, 1, value));
}

NodeId Tape::parameter_node(std::size_t i) const {
  return NodeId{parameters_.at(i), tag_};
}

NodeId Tape::add(NodeId a, NodeId b) {
  const auto ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  require_same_or_scalar(va, vb, "add");
  Node n{Op::kAdd, ia, ib};
  n.value = broadcast(va, vb, [](double x, double y) { return x + y; });
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const auto ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  require_same_or_scalar(va, vb, "sub");
  Node n{Op::kSub, ia, ib};
  n.value = broadcast(va, vb, [](double x, double y) { return x - y; });
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const auto ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  require_same_or_scalar(va, vb, "mul");
  Node n{Op::kMul, ia, ib};
  n.value = broadcast(va, vb, [](double x, double y) { return x * y; });
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  const auto ia = check(a);
  Node n{Op::kScale, ia};
  n.aux = factor;
  n.value = nodes_[ia].value * factor;
  return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double offset) {
  const auto ia = check(a);
  Node n{Op::kAddScalar, ia};
  n.aux = offset;
  n.value = nodes_[ia].value.array() + offset;
  return push(std::move(n));
}

NodeId Tape::affine(NodeId weight, NodeId input, NodeId bias) {
  const auto iw = check(weight), ix = check(input), ib = check(bias);
  const Matrix& w = nodes_[iw].value;
  const Matrix& x = nodes_[ix].value;
  const Matrix& b = nodes_[ib].value;
  if (w.cols() != x.rows() || b.rows() != w.rows() || b.cols() != 1) {
    throw ShapeError("affine: weight " + shape_of(w) + ", input " +
                     shape_of(x) + ", bias " + shape_of(b));
  }
  Node n{Op::kAffine, iw, ix, ib};
  n.value.noalias() = w * x;
  n.value.colwise() += b.col(0);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const auto ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  if (va.cols() != vb.rows()) {
    throw ShapeError("matmul: " + shape_of(va) + " * " + shape_of(vb));
  }
  Node n{Op::kMatmul, ia, ib};
  n.value.noalias() = va * vb;
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  const auto ia = check(a);
  Node n{Op::kTranspose, ia};
  n.value = nodes_[ia].value.transpose();
  return push(std::move(n));
}

NodeId Tape::prelu(NodeId x, NodeId slope) {
  const auto ix = check(x), is = check(slope);
  const Matrix& s = nodes_[is].value;
  if (!is_scalar(s)) throw ShapeError("prelu: slope must be 1x1");
  const double a = s(0, 0);
  Node n{Op::kPrelu, ix, is};
  n.value = nodes_[ix].value.unaryExpr(
      [a](double v) { return v >= 0.0 ? v : a * v; });
  return push(std::move(n));
}

NodeId Tape::tanh(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kTanh, ix};
  n.value = nodes_[ix].value.array().tanh();
  return push(std::move(n));
}

NodeId Tape::sin(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kSin, ix};
  n.value = nodes_[ix].value.array().sin();
  return push(std::move(n));
}

NodeId Tape::cos(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kCos, ix};
  n.value = nodes_[ix].value.array().cos();
  return push(std::move(n));
}

NodeId Tape::square(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kSquare, ix};
  n.value = nodes_[ix].value.array().square();
  return push(std::move(n));
}

NodeId Tape::cube(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kCube, ix};
  n.value = nodes_[ix].value.array().cube();
  return push(std::move(n));
}

NodeId Tape::mean(NodeId x) {
  const auto ix = check(x);
  const Matrix& v = nodes_[ix].value;
  if (v.size() == 0) throw ShapeError("mean: empty operand");
  Node n{Op::kMean, ix};
  n.value = Matrix::Constant(1, 1, v.mean());
  return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kSum, ix};
  n.value = Matrix::Constant(1, 1, nodes_[ix].value.sum());
  return push(std::move(n));
}

NodeId Tape::frobenius_sq(NodeId x) {
  const auto ix = check(x);
  Node n{Op::kFrobeniusSq, ix};
  n.value = Matrix::Constant(1, 1, nodes_[ix].value.squaredNorm());
  return push(std::move(n));
}

NodeId Tape::sqrt(NodeId x) {
  const auto ix = check(x);
  const Matrix& v = nodes_[ix].value;
  if ((v.array() < 0.0).any()) throw DomainError("sqrt of negative value");
  Node n{Op::kSqrt, ix};
  n.value = v.array().sqrt();
  return push(std::move(n));
}

NodeId Tape::row_mean(NodeId x) {
  const auto ix = check(x);
  const Matrix& v = nodes_[ix].value;
  if (v.cols() == 0) throw ShapeError("row_mean: no columns");
  Node n{Op::kRowMean, ix};
  n.value = v.rowwise().mean();
  return push(std::move(n));
}

NodeId Tape::sub_col(NodeId x, NodeId col) {
  const auto ix = check(x), ic = check(col);
  const Matrix& v = nodes_[ix].value;
  const Matrix& c = nodes_[ic].value;
  if (c.cols() != 1 || c.rows() != v.rows()) {
    throw ShapeError("sub_col: " + shape_of(v) + " - " + shape_of(c));
  }
  Node n{Op::kSubCol, ix, ic};
  n.value = v;
  n.value.colwise() -= c.col(0);
  return push(std::move(n));
}

NodeId Tape::gather_cols(NodeId x, std::vector<Eigen::Index> cols) {
  const auto ix = check(x);
  const Matrix& v = nodes_[ix].value;
  Node n{Op::kGatherCols, ix};
  n.value.resize(v.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= v.cols()) {
      throw ShapeError("gather_cols: column " + std::to_string(cols[j]) +
                       " out of range for " + shape_of(v));
    }
    n.value.col(static_cast<Eigen::Index>(j)) = v.col(cols[j]);
  }
  n.indices = std::move(cols);
  return push(std::move(n));
}

NodeId Tape::vstack(std::span<const NodeId> parts) {
  if (parts.empty()) throw ShapeError("vstack: no operands");
  Node n{Op::kVstack};
  Eigen::Index rows = 0;
  const Eigen::Index cols = nodes_[check(parts[0])].value.cols();
  for (NodeId p : parts) {
    const auto ip = check(p);
    const Matrix& v = nodes_[ip].value;
    if (v.cols() != cols) {
      throw ShapeError("vstack: column mismatch " + shape_of(v));
    }
    rows += v.rows();
    n.indices.push_back(ip);
  }
  n.value.resize(rows, cols);
  Eigen::Index r = 0;
  for (NodeId p : parts) {
    const Matrix& v = nodes_[p.index].value;
    n.value.middleRows(r, v.rows()) = v;
    r += v.rows();
  }
  return push(std::move(n));
}

NodeId Tape::row(NodeId x, Eigen::Index r) {
  const auto ix = check(x);
  const Matrix& v = nodes_[ix].value;
  if (r < 0 || r >= v.rows()) throw ShapeError("row: index out of range");
  Node n{Op::kRow, ix};
  n.aux = static_cast<double>(r);
  n.value = v.row(r);
  return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const { return nodes_[check(id)].value; }

double Tape::scalar(NodeId id) const {
  const Matrix& v = value(id);
  if (!is_scalar(v)) throw ShapeError("scalar: node is " + shape_of(v));
  return v(0, 0);
}

std::vector<Matrix> Tape::backward(NodeId root) const {
  const auto iroot = check(root);
  if (!is_scalar(nodes_[iroot].value)) {
    throw ShapeError("backward: root must be 1x1, got " +
                     shape_of(nodes_[iroot].value));
  }
  std::vector<Matrix> adj(iroot + 1);
  adj[iroot] = Matrix::Ones(1, 1);

  for (std::size_t k = iroot + 1; k-- > 0;) {
    if (adj[k].size() == 0) continue;
    const Node& n = nodes_[k];
    const Matrix& g = adj[k];
    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kAdd:
        accumulate(adj[n.in0], reduce_to(g, nodes_[n.in0].value));
        accumulate(adj[n.in1], reduce_to(g, nodes_[n.in1].value));
        break;
      case Op::kSub:
        accumulate(adj[n.in0], reduce_to(g, nodes_[n.in0].value));
        accumulate(adj[n.in1], reduce_to(-g, nodes_[n.in1].value));
        break;
      case Op::kMul: {
        const Matrix& a = nodes_[n.in0].value;
        const Matrix& b = nodes_[n.in1].value;
        auto times = [](double x, double y) { return x * y; };
        accumulate(adj[n.in0], reduce_to(broadcast(g, b, times), a));
        accumulate(adj[n.in1], reduce_to(broadcast(g, a, times), b));
        break;
      }
      case Op::kScale:
        accumulate(adj[n.in0], g * n.aux);
        break;
      case Op::kAddScalar:
        accumulate(adj[n.in0], g);
        break;
      case Op::kAffine: {
        const Matrix& w = nodes_[n.in0].value;
        const Matrix& x = nodes_[n.in1].value;
        Matrix gw = g * x.transpose();
        accumulate(adj[n.in0], gw);
        if (nodes_[n.in1].op != Op::kConstant) {
          Matrix gx = w.transpose() * g;
          accumulate(adj[n.in1], gx);
        }
        accumulate(adj[n.in2], g.rowwise().sum());
        break;
      }
      case Op::kMatmul: {
        const Matrix& a = nodes_[n.in0].value;
        const Matrix& b = nodes_[n.in1].value;
        Matrix ga = g * b.transpose();
        Matrix gb = a.transpose() * g;
        accumulate(adj[n.in0], ga);
        accumulate(adj[n.in1], gb);
        break;
      }
      case Op::kTranspose:
        accumulate(adj[n.in0], g.transpose());
        break;
      case Op::kPrelu: {
        const Matrix& x = nodes_[n.in0].value;
        const double a = nodes_[n.in1].value(0, 0);
        Matrix gx = x.binaryExpr(g, [a](double v, double gv) {
          return v >= 0.0 ? gv : a * gv;
        });
        const double ga =
            x.binaryExpr(g, [](double v, double gv) {
               return v >= 0.0 ? 0.0 : v * gv;
             }).sum();
        accumulate(adj[n.in0], gx);
        accumulate(adj[n.in1], Matrix::Constant(1, 1, ga));
        break;
      }
      case Op::kTanh: {
        Matrix gx = g.array() * (1.0 - n.value.array().square());
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kSin: {
        Matrix gx = g.array() * nodes_[n.in0].value.array().cos();
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kCos: {
        Matrix gx = -g.array() * nodes_[n.in0].value.array().sin();
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kSquare: {
        Matrix gx = 2.0 * g.array() * nodes_[n.in0].value.array();
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kCube: {
        Matrix gx = 3.0 * g.array() * nodes_[n.in0].value.array().square();
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kMean: {
        const Matrix& x = nodes_[n.in0].value;
        accumulate(adj[n.in0], Matrix::Constant(x.rows(), x.cols(),
                                                g(0, 0) / double(x.size())));
        break;
      }
      case Op::kSum: {
        const Matrix& x = nodes_[n.in0].value;
        accumulate(adj[n.in0], Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::kFrobeniusSq:
        accumulate(adj[n.in0], (2.0 * g(0, 0)) * nodes_[n.in0].value);
        break;
      case Op::kSqrt: {
        // d sqrt(x) = 1 / (2 sqrt(x)); infinite at 0, where we propagate 0
        // only if the incoming gradient is itself 0.
        Matrix gx = g.binaryExpr(n.value, [](double gv, double s) {
          return gv == 0.0 ? 0.0 : gv / (2.0 * s);
        });
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kRowMean: {
        const Matrix& x = nodes_[n.in0].value;
        Matrix gx = (g.col(0) / double(x.cols())).replicate(1, x.cols());
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kSubCol:
        accumulate(adj[n.in0], g);
        accumulate(adj[n.in1], -g.rowwise().sum());
        break;
      case Op::kGatherCols: {
        const Matrix& x = nodes_[n.in0].value;
        Matrix gx = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t j = 0; j < n.indices.size(); ++j) {
          gx.col(n.indices[j]) += g.col(static_cast<Eigen::Index>(j));
        }
        accumulate(adj[n.in0], gx);
        break;
      }
      case Op::kVstack: {
        Eigen::Index r = 0;
        for (Eigen::Index ip : n.indices) {
          const Eigen::Index rows = nodes_[ip].value.rows();
          accumulate(adj[ip], g.middleRows(r, rows));
          r += rows;
        }
        break;
      }
      case Op::kRow: {
        const Matrix& x = nodes_[n.in0].value;
        Matrix gx = Matrix::Zero(x.rows(), x.cols());
        gx.row(static_cast<Eigen::Index>(n.aux)) = g;
        accumulate(adj[n.in0], gx);
        break;
      }
    }
  }

  std::vector<Matrix> grads;
  grads.reserve(parameters_.size());
  for (std::uint32_t p : parameters_) {
    const Matrix& v = nodes_[p].value;
    if (p <= iroot && adj[p].size() != 0) {
      grads.push_back(adj[p]);
    } else {
      grads.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
  return grads;
}

double Tape::min_abs_prelu_input() const {
  double m = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    if (n.op == Op::kPrelu) m = std::min(m, nodes_[n.in0].value.cwiseAbs().minCoeff());
  }
  return m;
}

double finite_difference_check(const ScalarBuilder& builder,
                               const std::vector<Matrix>& point, double h) {
  std::vector<ParamEntry> entries;
  for (std::size_t p = 0; p < point.size(); ++p) {
    for (Eigen::Index i = 0; i < point[p].size(); ++i) entries.emplace_back(p, i);
  }
  return finite_difference_check(builder, point, h, entries);
}

double finite_difference_check(const ScalarBuilder& builder,
                               const std::vector<Matrix>& point, double h,
                               std::span<const ParamEntry> entries) {
  if (!(h > 0.0)) throw DomainError("finite_difference_check: h must be > 0");

  auto evaluate = [&](const std::vector<Matrix>& at) {
    Tape tape;
    std::vector<NodeId> params;
    params.reserve(at.size());
    for (const Matrix& m : at) params.push_back(tape.parameter(m));
    return tape.scalar(builder(tape, params));
  };

  Tape tape;
  std::vector<NodeId> params;
  params.reserve(point.size());
  for (const Matrix& m : point) params.push_back(tape.parameter(m));
  const std::vector<Matrix> analytic = tape.backward(builder(tape, params));

  double worst = 0.0;
  std::vector<Matrix> probe = point;
  for (const auto& [p, i] : entries) {
    const double base = point.at(p)(i);
    probe[p](i) = base + h;
    const double up = evaluate(probe);
    probe[p](i) = base - h;
    const double down = evaluate(probe);
    probe[p](i) = base;
    const double numeric = (up - down) / (2.0 * h);
    const double err =
        std::abs(analytic[p](i) - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace idecomp
