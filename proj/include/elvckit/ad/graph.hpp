#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "elvckit/ad/tensor.hpp"

namespace elvc::ad {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const { return graph_->value(id_); }
  const Tensor<T>& grad() const { return graph_->grad(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return graph_->requires_grad(id_); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is already topologically
/// sorted and backward() simply walks it from the loss towards the leaves.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> input(Tensor<T> value, bool requires_grad = false) {
    check_finite(value);
    return push(std::move(value), {}, requires_grad, nullptr);
  }

  /// Gradients reaching a trainable parameter are added to `p.grad` by backward().
  Var<T> param(Parameter<T>& p, bool trainable = true) {
    auto v = push(p.value, {}, trainable, nullptr);
    if (trainable) nodes_[v.id()].param = &p;
    return v;
  }

  /// Adds an op node; requires_grad propagates from the parents.
  Var<T> op(Tensor<T> value, std::vector<std::size_t> parents, BackwardFn backward) {
    check_finite(value);
    bool rg = false;
    for (auto p : parents) rg = rg || nodes_[p].requires_grad;
    return push(std::move(value), std::move(parents), rg, rg ? std::move(backward) : nullptr);
  }

  void backward(Var<T> loss) {
    require(!done_, ErrorKind::InvalidInput, "backward already ran on this graph; call reset_gradients() first");
    require(loss.value().size() == 1, ErrorKind::InvalidInput,
            "backward needs a scalar loss, got shape " + shape_str(loss.shape()));
    done_ = true;
    grad_ref(loss.id()).fill(T{1});
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param) {
        if (n.param->grad.empty()) n.param->zero_grad();
        require(n.param->grad.size() == n.grad.size(), ErrorKind::ShapeError, "gradient shape mismatch for " + n.param->name);
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
      }
    }
  }

  void reset_gradients() {
    for (auto& n : nodes_) n.grad = Tensor<T>();
    done_ = false;
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor<T>& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of node `id`, zero-allocated on first use.
  Tensor<T>& grad_ref(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> parents;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  void check_finite(const Tensor<T>& t) const {
    require(t.all_finite(), ErrorKind::InvalidData,
            "non-finite value produced in the autodiff graph at node " + std::to_string(nodes_.size()) + " " + shape_str(t.shape()));
  }

  Var<T> push(Tensor<T> value, std::vector<std::size_t> parents, bool rg, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}, std::move(parents), rg, std::move(fn), nullptr});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool done_ = false;
};

}  // namespace elvc::ad
