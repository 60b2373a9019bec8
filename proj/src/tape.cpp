#include "seqtag/tape.hpp"

#include "seqtag/error.hpp"

namespace seqtag::nn {

const Array& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Array value) { return push(Node{std::move(value), {}, false, {}}); }

Var Tape::variable(Array value) { return push(Node{std::move(value), {}, true, {}}); }

Var Tape::param(const ParamSet& params, const std::string& name) {
  if (auto it = bound_params_.find(name); it != bound_params_.end()) return Var(this, it->second);
  Var v = variable(params.at(name));
  bound_params_.emplace(name, v.id_);
  return v;
}

Var Tape::record(Array value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Array value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    require(in.tape_ == this, "op inputs must live on the same tape");
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node node{std::move(value), {}, needs, {}};
  if (needs) node.backward = std::move(fn);
  return push(std::move(node));
}

Array* Tape::grad_slot(Var v) {
  Node& node = nodes_[v.id_];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = Array(node.value.shape(), 0.0);
  return &node.grad;
}

void Tape::backward(Var output) {
  require(output.tape_ == this, "backward on a foreign variable");
  require(value(output).size() == 1, "backward requires a scalar output");
  Array* seed = grad_slot(output);
  if (seed == nullptr) return;
  (*seed)[0] += 1.0;
  for (std::int64_t i = output.id_; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, node.value, node.grad);
  }
}

Array Tape::grad(Var v) const {
  const Node& node = nodes_[v.id_];
  if (node.grad.empty()) return Array(node.value.shape(), 0.0);
  return node.grad;
}

std::map<std::string, Array> Tape::param_grads(const ParamSet& params) const {
  std::map<std::string, Array> out;
  for (const auto& [name, p] : params) {
    auto it = bound_params_.find(name);
    if (it == bound_params_.end())
      out.emplace(name, Array(p.value.shape(), 0.0));
    else
      out.emplace(name, grad(Var(const_cast<Tape*>(this), it->second)));
  }
  return out;
}

}  // namespace seqtag::nn
