#pragma once

// Define-by-run reverse-mode differentiation over dense double matrices.
//
// Every node holds a matrix value (scalars are 1x1). A Tape is append-only,
// so the inputs of node i always have ids < i and backward is a single
// reverse sweep. Parameters are leaf nodes whose gradients are returned by
// backward() in creation order.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace idecomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Opaque handle into the Tape that issued it.
struct NodeId {
  std::uint32_t index = 0;
  std::uint32_t tape = 0;
};

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAffine,
  kMatmul,
  kTranspose,
  kPrelu,
  kTanh,
  kSin,
  kCos,
  kSquare,
  kCube,
  kMean,
  kSum,
  kFrobeniusSq,
  kSqrt,
  kRowMean,
  kSubCol,
  kGatherCols,
  kVstack,
  kRow,
};

class Tape {
 public:
  Tape();

  NodeId constant(Matrix value);
  NodeId constant(double value);
  NodeId parameter(Matrix value);
  NodeId parameter(double value);

  // Elementwise; a 1x1 operand broadcasts against the other.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);

  NodeId scale(NodeId a, double factor);
  NodeId add_scalar(NodeId a, double offset);

  /// weight (out x in) * input (in x B) + bias (out x 1) broadcast over columns.
  NodeId affine(NodeId weight, NodeId input, NodeId bias);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);

  /// x where x >= 0, slope * x otherwise; slope is a 1x1 node. The derivative
  /// at exactly 0 is taken from the x >= 0 branch.
  NodeId prelu(NodeId x, NodeId slope);

  NodeId tanh(NodeId x);
  NodeId sin(NodeId x);
  NodeId cos(NodeId x);
  NodeId square(NodeId x);
  NodeId cube(NodeId x);

  NodeId mean(NodeId x);          // all entries -> 1x1
  NodeId sum(NodeId x);           // all entries -> 1x1
  NodeId frobenius_sq(NodeId x);  // sum of squares -> 1x1
  NodeId sqrt(NodeId x);          // elementwise, operand >= 0

  NodeId row_mean(NodeId x);              // r x c -> r x 1
  NodeId sub_col(NodeId x, NodeId col);   // x - col * 1^T
  NodeId gather_cols(NodeId x, std::vector<Eigen::Index> cols);
  NodeId vstack(std::span<const NodeId> parts);
  NodeId row(NodeId x, Eigen::Index r);

  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }
  /// Smallest |x| over all prelu inputs on the tape (infinity if none).
  double min_abs_prelu_input() const;
  std::size_t parameter_count() const { return parameters_.size(); }
  NodeId parameter_node(std::size_t i) const;

  /// Gradient of a 1x1 root with respect to every parameter, in the order
  /// the parameters were created. Does not mutate the tape.
  std::vector<Matrix> backward(NodeId root) const;

 private:
  struct Node {
    explicit Node(Op o, std::uint32_t a = 0, std::uint32_t b = 0, std::uint32_t c = 0)
        : op(o), in0(a), in1(b), in2(c) {}
    Op op;
    std::uint32_t in0 = 0;
    std::uint32_t in1 = 0;
    std::uint32_t in2 = 0;
    double aux = 0.0;
    Matrix value;
    std::vector<Eigen::Index> indices;  // gather columns / vstack inputs
  };

  std::uint32_t check(NodeId id) const;
  NodeId push(Node node);

  std::uint32_t tag_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parameters_;
};

/// Builds a scalar from parameter nodes created (in order) from `point`.
using ScalarBuilder = std::function<NodeId(Tape&, std::span<const NodeId>)>;

/// Max over parameter entries of |analytic - central difference| /
/// max(1, |central difference|). The builder must be deterministic and the
/// point must not sit on a kink (e.g. a prelu input at 0).
double finite_difference_check(const ScalarBuilder& builder,
                               const std::vector<Matrix>& point, double h);

/// (parameter index, flat entry index) pair.
using ParamEntry = std::pair<std::size_t, Eigen::Index>;

/// Same, restricted to the listed entries.
double finite_difference_check(const ScalarBuilder& builder,
                               const std::vector<Matrix>& point, double h,
                               std::span<const ParamEntry> entries);

}  // namespace idecomp
