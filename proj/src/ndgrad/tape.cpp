#include "lsrlab/ndgrad/tape.hpp"

#include <algorithm>

#include "lsrlab/error.hpp"

namespace lsrlab::ndgrad {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->needs_grad(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return {this, nodes_.size() - 1};
}

void Tape::freeze_prefix(std::string prefix) { frozen_.push_back(std::move(prefix)); }

bool Tape::is_frozen(const std::string& name) const {
  return std::any_of(frozen_.begin(), frozen_.end(),
                     [&](const std::string& p) { return name.rfind(p, 0) == 0; });
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return {this, it->second};
  if (is_frozen(name)) return constant(value);
  nodes_.push_back(Node{value, {}, false, true, {}});
  params_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn, const char* op) {
  return record(std::move(value), std::vector<Var>(parents), std::move(fn), op);
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn, const char* op) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::NonFinite, std::string(op) + " produced a non-finite value");
  }
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw Error(ErrorCode::ShapeMismatch, "operands live on different tapes");
    needs = needs || nodes_[p.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, false, needs, needs ? std::move(fn) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape, 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Gradients Tape::backward(Var root) {
  if (root.tape != this) throw Error(ErrorCode::NotScalarRoot, "root is not on this tape");
  if (consumed_) throw Error(ErrorCode::TapeConsumed, "backward already ran on this tape");
  if (nodes_[root.id].value.size() != 1) {
    throw Error(ErrorCode::NotScalarRoot,
                "root has shape " + nodes_[root.id].value.shape_string());
  }
  consumed_ = true;
  if (nodes_[root.id].needs_grad) {
    grad_buffer(root.id).data[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || !n.has_grad || !n.backward) continue;
      n.backward(*this, i);
    }
  }
  Gradients out;
  for (const auto& [name, id] : params_) {
    Node& n = nodes_[id];
    out.emplace(name, n.has_grad ? n.grad : Tensor(n.value.shape, 0.0));
  }
  return out;
}

}  // namespace lsrlab::ndgrad
