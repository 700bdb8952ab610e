#include "noisyq/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "noisyq/kernels.hpp"

namespace noisyq::ad {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::check_id(NodeId id, const char* who) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::invalid_argument(std::string(who) + ": tensor ref " + std::to_string(id) +
                                " is not on this record");
  }
}

const Tensor& Graph::value(NodeId id) const {
  check_id(id, "value");
  return nodes_[id].value;
}

NodeId Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor Graph::compute(const Node& node, const Tensor* a, const Tensor* b) {
  switch (node.op) {
    case Op::Leaf:
      return node.value;
    case Op::MatMul: {
      Tensor out = Tensor::zeros({a->rows(), b->cols()});
      kern::matmul(a->data(), b->data(), out.data(), a->rows(), a->cols(), b->cols());
      return out;
    }
    case Op::Transpose: {
      Tensor out = Tensor::zeros({a->cols(), a->rows()});
      kern::transpose(a->data(), out.data(), a->rows(), a->cols());
      return out;
    }
    case Op::Add: {
      Tensor out = Tensor::zeros(a->shape());
      kern::add(a->data(), b->data(), out.data(), a->numel());
      return out;
    }
    case Op::AddBias: {
      Tensor out = Tensor::zeros(a->shape());
      kern::add_bias(a->data(), b->data(), out.data(), a->rows(), a->cols());
      return out;
    }
    case Op::MulElem: {
      Tensor out = Tensor::zeros(a->shape());
      kern::mul(a->data(), b->data(), out.data(), a->numel());
      return out;
    }
    case Op::Relu: {
      Tensor out = Tensor::zeros(a->shape());
      kern::relu(a->data(), out.data(), a->numel());
      return out;
    }
    case Op::SelectActions: {
      std::size_t batch = a->rows();
      Tensor out = Tensor::zeros({batch});
      for (std::size_t r = 0; r < batch; ++r) {
        out[r] = a->at(r, static_cast<std::size_t>(node.actions[r]));
      }
      return out;
    }
    case Op::SquaredError: {
      double acc = 0.0;
      std::size_t n = a->numel();
      for (std::size_t i = 0; i < n; ++i) {
        double d = node.target[i] - (*a)[i];
        acc += d * d;
      }
      return Tensor::scalar(acc / static_cast<double>(n));
    }
    case Op::CrossEntropyLogits: {
      std::size_t n = a->numel();
      double mx = (*a)[0];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, (*a)[i]);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += std::exp((*a)[i] - mx);
      double lse = mx + std::log(sum);
      return Tensor::scalar(lse - (*a)[static_cast<std::size_t>(node.label)]);
    }
    case Op::Sum: {
      double acc = 0.0;
      for (std::size_t i = 0; i < a->numel(); ++i) acc += (*a)[i];
      return Tensor::scalar(acc);
    }
    case Op::Scale: {
      Tensor out = Tensor::zeros(a->shape());
      for (std::size_t i = 0; i < a->numel(); ++i) out[i] = node.alpha * (*a)[i];
      return out;
    }
  }
  throw std::logic_error("Graph::compute: unknown op");
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  require(ta.is_matrix() && tb.is_matrix() && ta.cols() == tb.rows(),
          "matmul: dimension mismatch " + ta.shape_str() + " * " + tb.shape_str());
  Node n;
  n.op = Op::MatMul;
  n.in0 = a;
  n.in1 = b;
  n.value = compute(n, &ta, &tb);
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  check_id(a, "transpose");
  const Tensor& ta = nodes_[a].value;
  require(ta.is_matrix(), "transpose: expected matrix, got " + ta.shape_str());
  Node n;
  n.op = Op::Transpose;
  n.in0 = a;
  n.value = compute(n, &ta, nullptr);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_id(a, "add");
  check_id(b, "add");
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  require(ta.same_shape(tb), "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Node n;
  n.op = Op::Add;
  n.in0 = a;
  n.in1 = b;
  n.value = compute(n, &ta, &tb);
  return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId b) {
  check_id(x, "add_bias");
  check_id(b, "add_bias");
  const Tensor& tx = nodes_[x].value;
  const Tensor& tb = nodes_[b].value;
  require(tx.is_matrix() && tb.ndim() == 1 && tb.numel() == tx.cols(),
          "add_bias: shape mismatch " + tx.shape_str() + " vs " + tb.shape_str());
  Node n;
  n.op = Op::AddBias;
  n.in0 = x;
  n.in1 = b;
  n.value = compute(n, &tx, &tb);
  return push(std::move(n));
}

NodeId Graph::mul_elem(NodeId a, NodeId b) {
  check_id(a, "mul_elem");
  check_id(b, "mul_elem");
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  require(ta.same_shape(tb),
          "mul_elem: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Node n;
  n.op = Op::MulElem;
  n.in0 = a;
  n.in1 = b;
  n.value = compute(n, &ta, &tb);
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  check_id(x, "relu");
  Node n;
  n.op = Op::Relu;
  n.in0 = x;
  n.value = compute(n, &nodes_[x].value, nullptr);
  return push(std::move(n));
}

NodeId Graph::select_actions(NodeId q, std::vector<int> actions) {
  check_id(q, "select_actions");
  const Tensor& tq = nodes_[q].value;
  require(tq.is_matrix(), "select_actions: expected matrix, got " + tq.shape_str());
  require(actions.size() == tq.rows(),
          "select_actions: " + std::to_string(actions.size()) + " actions for " +
              std::to_string(tq.rows()) + " rows");
  for (int a : actions) {
    require(a >= 0 && static_cast<std::size_t>(a) < tq.cols(),
            "select_actions: action " + std::to_string(a) + " out of range");
  }
  Node n;
  n.op = Op::SelectActions;
  n.in0 = q;
  n.actions = std::move(actions);
  n.value = compute(n, &tq, nullptr);
  return push(std::move(n));
}

NodeId Graph::squared_error(NodeId pred, Tensor target) {
  check_id(pred, "squared_error");
  const Tensor& tp = nodes_[pred].value;
  require(tp.same_shape(target),
          "squared_error: shape mismatch " + tp.shape_str() + " vs " + target.shape_str());
  require(tp.numel() > 0, "squared_error: empty tensors");
  Node n;
  n.op = Op::SquaredError;
  n.in0 = pred;
  n.target = std::move(target);
  n.value = compute(n, &tp, nullptr);
  return push(std::move(n));
}

NodeId Graph::cross_entropy_logits(NodeId logits, int label) {
  check_id(logits, "cross_entropy_logits");
  const Tensor& tl = nodes_[logits].value;
  require(tl.numel() >= 2, "cross_entropy_logits: need at least 2 logits");
  require(label >= 0 && static_cast<std::size_t>(label) < tl.numel(),
          "cross_entropy_logits: label " + std::to_string(label) + " out of range for " +
              std::to_string(tl.numel()) + " logits");
  Node n;
  n.op = Op::CrossEntropyLogits;
  n.in0 = logits;
  n.label = label;
  n.value = compute(n, &tl, nullptr);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  check_id(x, "sum");
  Node n;
  n.op = Op::Sum;
  n.in0 = x;
  n.value = compute(n, &nodes_[x].value, nullptr);
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double alpha) {
  check_id(x, "scale");
  Node n;
  n.op = Op::Scale;
  n.in0 = x;
  n.alpha = alpha;
  n.value = compute(n, &nodes_[x].value, nullptr);
  return push(std::move(n));
}

std::vector<Tensor> Graph::backward(NodeId loss) const {
  check_id(loss, "backward");
  require(nodes_[loss].value.is_scalar(),
          "backward: loss must be scalar, got " + nodes_[loss].value.shape_str());

  std::vector<Tensor> grads(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads[i] = Tensor::zeros(nodes_[i].value.shape());
  }
  grads[loss][0] = 1.0;

  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Tensor& g = grads[id];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        // dA = G * B^T, dB = A^T * G
        Tensor bt = Tensor::zeros({b.cols(), b.rows()});
        kern::transpose(b.data(), bt.data(), b.rows(), b.cols());
        Tensor da = Tensor::zeros(a.shape());
        kern::matmul(g.data(), bt.data(), da.data(), g.rows(), g.cols(), bt.cols());
        kern::axpy(1.0, da.data(), grads[n.in0].data(), da.numel());

        Tensor at = Tensor::zeros({a.cols(), a.rows()});
        kern::transpose(a.data(), at.data(), a.rows(), a.cols());
        Tensor db = Tensor::zeros(b.shape());
        kern::matmul(at.data(), g.data(), db.data(), at.rows(), at.cols(), g.cols());
        kern::axpy(1.0, db.data(), grads[n.in1].data(), db.numel());
        break;
      }
      case Op::Transpose: {
        const Tensor& a = nodes_[n.in0].value;
        Tensor gt = Tensor::zeros(a.shape());
        kern::transpose(g.data(), gt.data(), g.rows(), g.cols());
        kern::axpy(1.0, gt.data(), grads[n.in0].data(), gt.numel());
        break;
      }
      case Op::Add:
        kern::axpy(1.0, g.data(), grads[n.in0].data(), g.numel());
        kern::axpy(1.0, g.data(), grads[n.in1].data(), g.numel());
        break;
      case Op::AddBias: {
        kern::axpy(1.0, g.data(), grads[n.in0].data(), g.numel());
        Tensor cs = Tensor::zeros(nodes_[n.in1].value.shape());
        kern::col_sum(g.data(), cs.data(), g.rows(), g.cols());
        kern::axpy(1.0, cs.data(), grads[n.in1].data(), cs.numel());
        break;
      }
      case Op::MulElem: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        Tensor tmp = Tensor::zeros(g.shape());
        kern::mul(g.data(), b.data(), tmp.data(), g.numel());
        kern::axpy(1.0, tmp.data(), grads[n.in0].data(), tmp.numel());
        kern::mul(g.data(), a.data(), tmp.data(), g.numel());
        kern::axpy(1.0, tmp.data(), grads[n.in1].data(), tmp.numel());
        break;
      }
      case Op::Relu: {
        const Tensor& x = nodes_[n.in0].value;
        Tensor tmp = Tensor::zeros(g.shape());
        kern::relu_backward(x.data(), g.data(), tmp.data(), g.numel());
        kern::axpy(1.0, tmp.data(), grads[n.in0].data(), tmp.numel());
        break;
      }
      case Op::SelectActions: {
        Tensor& gq = grads[n.in0];
        for (std::size_t r = 0; r < n.actions.size(); ++r) {
          gq.at(r, static_cast<std::size_t>(n.actions[r])) += g[r];
        }
        break;
      }
      case Op::SquaredError: {
        const Tensor& p = nodes_[n.in0].value;
        Tensor& gp = grads[n.in0];
        double scale = 2.0 * g[0] / static_cast<double>(p.numel());
        for (std::size_t i = 0; i < p.numel(); ++i) {
          gp[i] += scale * (p[i] - n.target[i]);
        }
        break;
      }
      case Op::CrossEntropyLogits: {
        const Tensor& z = nodes_[n.in0].value;
        Tensor& gz = grads[n.in0];
        std::size_t cnt = z.numel();
        double mx = z[0];
        for (std::size_t i = 1; i < cnt; ++i) mx = std::max(mx, z[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < cnt; ++i) sum += std::exp(z[i] - mx);
        for (std::size_t i = 0; i < cnt; ++i) {
          double softmax = std::exp(z[i] - mx) / sum;
          double onehot = (static_cast<int>(i) == n.label) ? 1.0 : 0.0;
          gz[i] += g[0] * (softmax - onehot);
        }
        break;
      }
      case Op::Sum: {
        Tensor& gx = grads[n.in0];
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
        break;
      }
      case Op::Scale: {
        Tensor& gx = grads[n.in0];
        kern::axpy(n.alpha, g.data(), gx.data(), g.numel());
        break;
      }
    }
  }
  return grads;
}

std::vector<Tensor> Graph::replay_forward() const {
  std::vector<Tensor> values;
  values.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    const Tensor* a = n.in0 >= 0 ? &values[n.in0] : nullptr;
    const Tensor* b = n.in1 >= 0 ? &values[n.in1] : nullptr;
    values.push_back(compute(n, a, b));
  }
  return values;
}

}  // namespace noisyq::ad
