#include "tvt/tape.hpp"

namespace tvt {

Parameter& ParameterStore::create(const std::string& name, Tensor init) {
  if (contains(name)) throw ValueError("parameter '" + name + "' already registered");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->tensor = std::move(init);
  index_[name] = items_.size();
  items_.push_back(std::move(p));
  return *items_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
  return *items_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
  return *items_[it->second];
}

Index ParameterStore::scalar_count() const {
  Index n = 0;
  for (const auto& p : items_) n += p->tensor.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : items_) p->tensor.grad().setZero();
}

const Tensor& Var::tensor() const {
  if (!valid()) throw ValueError("use of an unbound tape handle");
  return tape->tensor(id);
}

const Shape& Var::shape() const { return tensor().shape(); }

Var Tape::constant(Tensor value) {
  Node n;
  n.tensor = std::move(value);
  n.tensor.tape_id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.back().tensor.tape_id};
}

Var Tape::leaf(Parameter& p) {
  auto it = leaf_ids_.find(&p);
  if (it != leaf_ids_.end()) return Var{this, it->second};
  Node n;
  n.tensor = p.tensor;  // copy of current values; grads stay on the tape copy
  n.tensor.drop_grad();
  n.tensor.tape_id = static_cast<int>(nodes_.size());
  n.param = &p;
  leaf_ids_[&p] = n.tensor.tape_id;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.back().tensor.tape_id};
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn backward) {
  Node n;
  n.tensor = std::move(value);
  n.tensor.tape_id = static_cast<int>(nodes_.size());
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.back().tensor.tape_id};
}

void Tape::backward(Var loss) {
  check_owns(loss, "backward");
  if (tensor(loss.id).size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     shape_to_string(tensor(loss.id).shape()));
  }
  grad_buffer(loss.id)(0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.tensor.has_grad()) continue;  // never reached from the loss
    if (n.backward) n.backward(*this, n);
  }
  for (auto& [param, id] : leaf_ids_) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.tensor.has_grad()) n.param->tensor.grad() += n.tensor.grad();
  }
}

Tensor& Tape::tensor(int id) { return nodes_.at(static_cast<size_t>(id)).tensor; }

const Tensor& Tape::tensor(int id) const { return nodes_.at(static_cast<size_t>(id)).tensor; }

Eigen::ArrayXd& Tape::grad_buffer(int id) { return tensor(id).grad(); }

bool Tape::has_grad(int id) const { return tensor(id).has_grad(); }

const Eigen::ArrayXd& Tape::grad(Var v) const {
  check_owns(v, "grad");
  return tensor(v.id).grad();
}

void Tape::check_owns(Var v, const char* what) const {
  if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw ValueError(std::string(what) + " given a handle from a different tape");
  }
}

}  // namespace tvt
