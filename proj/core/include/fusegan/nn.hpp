#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fusegan/autodiff.hpp"
#include "fusegan/ops.hpp"
#include "fusegan/rng.hpp"
#include "fusegan/serialize.hpp"

namespace fusegan::nn {

struct Param {
  std::string name;
  Var var;
};

/// Flat, order-stable registry of a network's parameters and buffers.
/// Layers register themselves at construction; serialization and the
/// optimizer walk the registry.
class ParamStore {
 public:
  Var add_param(const std::string& name, Tensor init);
  Tensor add_buffer(const std::string& name, Tensor init);

  const std::vector<Param>& params() const { return params_; }
  std::vector<Var> vars() const;
  int64_t num_parameters() const;

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);
  uint64_t content_hash() const;

 private:
  std::vector<Param> params_;
  std::vector<std::pair<std::string, Tensor>> buffers_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
         double weight_std = -1.0);  // default: 1/sqrt(in)
  Var forward(const Var& x) const;  // x [B,in] -> [B,out]

  Var w;  // [in,out]
  Var b;  // [out]
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
         int kernel, int stride, int pad, Rng& rng, double weight_std = 0.02);
  Var forward(const Var& x) const;

  Var w;  // [out,in,k,k]
  Var b;  // [out]
  int stride = 1, pad = 0;
};

/// Batch normalization without learned affine (the conditional affine of the
/// CBN fusion block supplies scale and shift). Tracks running statistics for
/// inference.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& ps, const std::string& name, int64_t channels,
              double momentum = 0.1, double eps = 1e-5);
  Var forward(const Var& x, bool training);

  Tensor running_mean, running_var;
  double momentum = 0.1, eps = 1e-5;
  int64_t channels = 0;
};

/// Adam with bias correction. State serializes for exact training resume.
class Adam {
 public:
  Adam(std::vector<Var> params, double lr, double beta1, double beta2,
       double eps = 1e-8);

  void step(const std::vector<Var>& grads);
  double lr() const { return lr_; }
  int64_t steps() const { return t_; }

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace fusegan::nn
