#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lsrlab/ndgrad/tensor.hpp"

namespace lsrlab::ndgrad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  bool requires_grad() const;
};

using Gradients = std::map<std::string, Tensor>;

/// Records executed operations in creation order (parents always precede
/// children). Confined to one thread; backward may run once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is reported by backward(). Binding the same name
  /// twice returns the first node. Names under a frozen prefix become constants.
  Var parameter(const std::string& name, const Tensor& value);
  void freeze_prefix(std::string prefix);
  bool is_frozen(const std::string& name) const;

  /// Appends an op result. `fn` is invoked only when the node needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn, const char* op);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn, const char* op);

  /// Reverse pass from a scalar root. Every bound trainable parameter gets an
  /// entry, zero-filled when no path reaches it.
  Gradients backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of `id`, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  std::vector<std::string> frozen_;
  bool consumed_ = false;
};

}  // namespace lsrlab::ndgrad
