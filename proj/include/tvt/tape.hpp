#pragma once

#include "tvt/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace tvt {

class Tape;
struct Node;

/// Named trainable tensor. The embedded gradient buffer accumulates across
/// backward passes until the optimizer clears it.
struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Owns parameters in creation order and resolves them by name. Creation
/// order is the canonical ordering for checkpoints and optimizer state.
class ParameterStore {
 public:
  Parameter& create(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  size_t size() const { return items_.size(); }
  Index scalar_count() const;
  void zero_grads();

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::unordered_map<std::string, size_t> index_;
};

/// Handle to a node on a tape. Cheap to copy; all ops are free functions
/// over these handles.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& tensor() const;
  const Shape& shape() const;
  Index rows() const { return tensor().rows(); }
  Index cols() const { return tensor().cols(); }
  double scalar_value() const { return tensor().scalar_value(); }
};

using BackwardFn = std::function<void(Tape&, const Node&)>;

struct Node {
  Tensor tensor;
  std::vector<int> inputs;
  BackwardFn backward;          // empty for constants and leaves
  Parameter* param = nullptr;   // set on leaf nodes only
};

/// Define-by-run gradient tape. Nodes are appended in forward order and
/// visited strictly in reverse during backward, so every consumer has
/// deposited its contribution before a node propagates its own.
class Tape {
 public:
  Var constant(Tensor value);
  /// Copies the parameter's current values onto the tape. Repeated calls
  /// for the same parameter return the same node, so shared weights
  /// accumulate fan-out gradients additively.
  Var leaf(Parameter& p);
  Var record(Tensor value, std::vector<int> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse, then flushes
  /// leaf gradients into their parameters.
  void backward(Var loss);

  Tensor& tensor(int id);
  const Tensor& tensor(int id) const;
  /// Gradient buffer of a node, allocated to zeros on first touch.
  Eigen::ArrayXd& grad_buffer(int id);
  bool has_grad(int id) const;
  const Eigen::ArrayXd& grad(Var v) const;

  size_t size() const { return nodes_.size(); }
  void check_owns(Var v, const char* what) const;

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> leaf_ids_;
};

}  // namespace tvt
