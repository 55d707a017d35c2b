#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "parttrack/errors.hpp"

namespace parttrack {

/// Row-major dense matrix. Feature maps are stored as (positions x channels),
/// so row-major keeps one part vector contiguous.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <typename Scalar>
struct Node {
  Mat<Scalar> value;
  Mat<Scalar> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into self.parents.
  std::function<void(Node&)> backward;
};

template <typename Scalar>
void accumulate_grad(Node<Scalar>& node, const Mat<Scalar>& g) {
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

/// Handle to a node of the computation graph. Copies share the node.
///
/// Values are rank-2 (rows x cols); vectors are 1 x n. A tensor is immutable
/// after construction apart from gradient accumulation and explicit
/// parameter updates through mutable_value() on leaves.
template <typename Scalar>
class Tensor {
 public:
  using scalar_type = Scalar;

  Tensor() : node_(std::make_shared<Node<Scalar>>()) {}

  explicit Tensor(Mat<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Mat<Scalar>::Zero(rows, cols), requires_grad);
  }

  static Tensor scalar(Scalar v) {
    Mat<Scalar> m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m));
  }

  static Tensor from_node(std::shared_ptr<Node<Scalar>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  const Mat<Scalar>& value() const { return node_->value; }
  Mat<Scalar>& mutable_value() { return node_->value; }

  bool has_grad() const { return node_->grad.size() != 0; }
  /// Gradient of the last backward() w.r.t. this tensor; zeros if none flowed.
  Mat<Scalar> grad() const {
    if (has_grad()) return node_->grad;
    return Mat<Scalar>::Zero(rows(), cols());
  }
  void zero_grad() { node_->grad.resize(0, 0); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on a tensor with more than one element");
    return node_->value(0, 0);
  }

  /// Same value, cut from the graph.
  Tensor detach() const { return Tensor(node_->value, false); }

  /// Reverse-mode sweep from this scalar.
  void backward() const;

  const std::shared_ptr<Node<Scalar>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<Scalar>> node_;
};

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (size() != 1) {
    throw ContractError("backward() requires a scalar (1x1) tensor, got " +
                        std::to_string(rows()) + "x" + std::to_string(cols()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> seen;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<Scalar>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  accumulate_grad(*node_, Mat<Scalar>::Ones(1, 1).eval());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>& n = **it;
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(n);
    // Interior gradients are not needed once propagated.
    n.grad.resize(0, 0);
  }
}

}  // namespace parttrack
