#include "fusegan/autodiff.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "fusegan/errors.hpp"
#include "fusegan/ops.hpp"

namespace fusegan {

namespace {
thread_local int g_no_grad_depth = 0;
}

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

Var variable(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->op = "leaf";
  return n;
}

Var constant(Tensor value) { return variable(std::move(value), false); }

Var constant_scalar(float v) { return constant(Tensor::scalar(v)); }

Var make_op(Tensor value, std::vector<Var> parents, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p && p->requires_grad) {
        needs = true;
        break;
      }
  }
  if (needs) {
    n->parents = std::move(parents);
    n->requires_grad = true;
  }
  return n;
}

namespace {

// Marks every node from which at least one of `targets` is reachable.
void mark_needed(const Var& root, const std::unordered_set<Node*>& targets,
                 std::unordered_map<Node*, bool>& needed) {
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node* n = f.n;
    if (f.next_parent == 0) {
      if (needed.count(n)) {
        stack.pop_back();
        continue;
      }
      if (targets.count(n)) {
        needed[n] = true;
        stack.pop_back();
        continue;
      }
      if (n->parents.empty()) {
        needed[n] = false;
        stack.pop_back();
        continue;
      }
    }
    if (f.next_parent < n->parents.size()) {
      Node* p = n->parents[f.next_parent].get();
      ++f.next_parent;
      if (p && !needed.count(p)) stack.push_back({p, 0});
      continue;
    }
    bool any = false;
    for (const auto& p : n->parents)
      if (p && needed.at(p.get())) {
        any = true;
        break;
      }
    needed[n] = any;
    stack.pop_back();
  }
}

// Topological order (output first) over needed nodes reachable from root.
std::vector<Node*> topo_order(const Var& root,
                              const std::unordered_map<Node*, bool>& needed) {
  std::vector<Node*> order;
  auto is_needed = [&](Node* n) {
    auto it = needed.find(n);
    return it != needed.end() && it->second;
  };
  if (!is_needed(root.get())) return order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent].get();
      ++f.next_parent;
      if (p && is_needed(p) && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
      continue;
    }
    order.push_back(f.n);
    stack.pop_back();
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph) {
  if (!output) throw ContractViolation("grad: null output");
  if (output->numel() != 1)
    throw ContractViolation("grad: output must be scalar, got " +
                            shape_str(output->shape()));

  std::unordered_set<Node*> targets;
  for (const auto& in : inputs) {
    if (!in) throw ContractViolation("grad: null input");
    targets.insert(in.get());
  }

  std::unordered_map<Node*, bool> needed;
  mark_needed(output, targets, needed);

  std::unordered_map<Node*, Var> cot;

  auto run_backward = [&]() {
    auto order = topo_order(output, needed);
    if (!order.empty())
      cot[output.get()] = constant(Tensor(output->shape(), 1.0f));
    for (Node* n : order) {
      auto it = cot.find(n);
      if (it == cot.end()) continue;  // dead branch
      if (!n->vjp) continue;          // leaf target
      auto parent_grads = n->vjp(it->second);
      if (parent_grads.size() != n->parents.size())
        throw ContractViolation(std::string("vjp arity mismatch in op ") + n->op);
      for (size_t i = 0; i < n->parents.size(); ++i) {
        const Var& p = n->parents[i];
        if (!p || !parent_grads[i]) continue;
        auto nit = needed.find(p.get());
        if (nit == needed.end() || !nit->second) continue;
        auto cit = cot.find(p.get());
        if (cit == cot.end())
          cot[p.get()] = parent_grads[i];
        else
          cit->second = ops::add(cit->second, parent_grads[i]);
      }
    }
  };

  if (create_graph) {
    run_backward();
  } else {
    NoGradGuard ng;
    run_backward();
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto it = cot.find(in.get());
    if (it != cot.end())
      result.push_back(it->second);
    else
      result.push_back(constant(Tensor(in->shape())));  // exact zeros
  }
  return result;
}

}  // namespace fusegan
