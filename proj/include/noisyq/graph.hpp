#pragma once

#include <cstdint>
#include <vector>

#include "noisyq/tensor.hpp"

namespace noisyq::ad {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  AddBias,
  MulElem,
  Relu,
  SelectActions,
  SquaredError,
  CrossEntropyLogits,
  Sum,
  Scale,
};

/// One primitive-op application on the record: op id, input refs, the output
/// value, and whatever the op needs to replay or differentiate itself.
struct Node {
  Op op = Op::Leaf;
  NodeId in0 = -1;
  NodeId in1 = -1;
  Tensor value;
  double alpha = 0.0;          // Scale factor
  int label = -1;              // CrossEntropyLogits class index
  std::vector<int> actions;    // SelectActions row gather
  Tensor target;               // SquaredError constant target
};

/// Define-by-run computation record with reverse-mode differentiation.
///
/// Ops append nodes in topological order as they execute; backward() walks
/// the record once in reverse and returns the gradient of a scalar loss with
/// respect to every recorded tensor, inputs included. A record is replayable:
/// re-running the forward ops from the leaf values reproduces every node
/// value bit-for-bit.
class Graph {
 public:
  NodeId leaf(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId add(NodeId a, NodeId b);
  /// x[r,c] + b[c] for every row r.
  NodeId add_bias(NodeId x, NodeId b);
  NodeId mul_elem(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  /// Gathers q[r, actions[r]] from a [batch x actions] matrix into a vector.
  NodeId select_actions(NodeId q, std::vector<int> actions);
  /// Mean over elements of (target - pred)^2. The target is held constant;
  /// no gradient flows into it.
  NodeId squared_error(NodeId pred, Tensor target);
  /// -log softmax(logits)[label], stabilized by max-subtraction. Accepts any
  /// tensor of at least two logits; shape is flattened.
  NodeId cross_entropy_logits(NodeId logits, int label);
  NodeId sum(NodeId x);
  NodeId scale(NodeId x, double alpha);

  const Tensor& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the scalar at `loss` with respect to every recorded tensor,
  /// indexed by NodeId.
  std::vector<Tensor> backward(NodeId loss) const;

  /// Re-executes the forward pass from the leaves; returns recomputed values
  /// for every node.
  std::vector<Tensor> replay_forward() const;

 private:
  NodeId push(Node node);
  void check_id(NodeId id, const char* who) const;
  // Forward computation shared by op construction and replay.
  static Tensor compute(const Node& node, const Tensor* a, const Tensor* b);

  std::vector<Node> nodes_;
};

}  // namespace noisyq::ad
