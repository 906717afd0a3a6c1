#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fusegan/tensor.hpp"

namespace fusegan {

class Node;
using Var = std::shared_ptr<Node>;

/// Maps the cotangent of an op's output to cotangents for each parent
/// (null entries for non-differentiable parents). Closures capture the
/// forward values they need. The cotangents are built out of ordinary ops,
/// so a backward pass is itself differentiable when taping is enabled —
/// this is what makes the gradient penalty trainable.
using VjpFn = std::function<std::vector<Var>(const Var& grad_out)>;

class Node {
 public:
  Tensor value;
  std::vector<Var> parents;
  VjpFn vjp;
  bool requires_grad = false;
  const char* op = "leaf";

  const Shape& shape() const { return value.shape(); }
  int64_t numel() const { return value.numel(); }
};

/// Leaf variable. requires_grad marks it as a differentiation target.
Var variable(Tensor value, bool requires_grad = false);
/// Constant node (never differentiated through).
Var constant(Tensor value);
Var constant_scalar(float v);

/// Interior op node. Keeps parents only while taping is enabled and some
/// parent needs gradients, so inference graphs free activations eagerly.
/// The caller assigns `vjp` afterwards iff the node requires_grad.
Var make_op(Tensor value, std::vector<Var> parents, const char* op);

bool grad_enabled();

/// RAII scope that disables taping (forward still runs).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Reverse-mode gradient of a scalar output with respect to `inputs`.
/// Inputs not reachable from the output get exact zero gradients.
/// With create_graph=true the returned gradients are themselves
/// differentiable (used for the gradient penalty).
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph = false);

}  // namespace fusegan
