#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/param_set.hpp"

namespace seqtag::nn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Array& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode gradient tape over dense arrays.
///
/// Ops append a node holding the forward value and a closure that maps the
/// node's output gradient onto its inputs. Nodes that do not depend on any
/// variable carry no closure, so constants and stop-gradient barriers cost
/// nothing on the backward pass.
class Tape {
 public:
  using BackwardFn =
      std::function<void(Tape&, const Array& out_value, const Array& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Array value);
  Var variable(Array value);
  /// Leaf bound to a named parameter. Repeated calls return the same node.
  Var param(const ParamSet& params, const std::string& name);

  /// Runs the backward pass from a 1x1 output, seeding its gradient with 1.
  void backward(Var output);

  const Array& value(Var v) const { return nodes_[v.id_].value; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  /// Gradient of `v`, zeros when nothing flowed into it.
  Array grad(Var v) const;
  /// Gradients of every parameter in `params`, zeros for parameters that were
  /// not reached (never bound, or only reached through a stop-gradient).
  std::map<std::string, Array> param_grads(const ParamSet& params) const;

  /// Appends an op node. `fn` runs only when some input requires a gradient.
  Var record(Array value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Array value, const std::vector<Var>& inputs, BackwardFn fn);
  /// Gradient accumulator for `v`, or nullptr when `v` needs no gradient.
  Array* grad_slot(Var v);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    Array grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  Var push(Node node);

  std::vector<Node> nodes_;
  std::map<std::string, std::uint32_t> bound_params_;
};

}  // namespace seqtag::nn
