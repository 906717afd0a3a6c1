#include "fusegan/nn.hpp"

#include <cmath>

#include "fusegan/errors.hpp"

namespace fusegan::nn {

Var ParamStore::add_param(const std::string& name, Tensor init) {
  for (const auto& p : params_)
    if (p.name == name) throw ContractViolation("duplicate parameter " + name);
  Var v = variable(std::move(init), /*requires_grad=*/true);
  params_.push_back({name, v});
  return v;
}

Tensor ParamStore::add_buffer(const std::string& name, Tensor init) {
  for (const auto& b : buffers_)
    if (b.first == name) throw ContractViolation("duplicate buffer " + name);
  buffers_.emplace_back(name, init);
  return buffers_.back().second;  // shallow copy shares storage
}

std::vector<Var> ParamStore::vars() const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var);
  return out;
}

int64_t ParamStore::num_parameters() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.var->numel();
  return n;
}

void ParamStore::save(BinaryWriter& w) const {
  w.u64(params_.size());
  for (const auto& p : params_) {
    w.str(p.name);
    w.tensor(p.var->value);
  }
  w.u64(buffers_.size());
  for (const auto& b : buffers_) {
    w.str(b.first);
    w.tensor(b.second);
  }
}

namespace {
void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape())
    throw IoError("shape mismatch loading " + name + ": have " +
                  shape_str(dst.shape()) + ", file " + shape_str(src.shape()));
  std::copy(src.data(), src.data() + src.numel(), dst.data());
}
}  // namespace

void ParamStore::load(BinaryReader& r) {
  uint64_t np = r.u64();
  if (np != params_.size())
    throw IoError("parameter count mismatch: have " + std::to_string(params_.size()) +
                  ", file " + std::to_string(np));
  for (auto& p : params_) {
    std::string name = r.str();
    if (name != p.name) throw IoError("parameter order mismatch: " + name + " vs " + p.name);
    Tensor t = r.tensor();
    copy_into(p.var->value, t, name);
  }
  uint64_t nb = r.u64();
  if (nb != buffers_.size())
    throw IoError("buffer count mismatch loading checkpoint");
  for (auto& b : buffers_) {
    std::string name = r.str();
    if (name != b.first) throw IoError("buffer order mismatch: " + name + " vs " + b.first);
    Tensor t = r.tensor();
    copy_into(b.second, t, name);
  }
}

uint64_t ParamStore::content_hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& p : params_) h = tensor_hash(p.var->value, h);
  for (const auto& b : buffers_) h = tensor_hash(b.second, h);
  return h;
}

// ---------------------------------------------------------------------------

Linear::Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out,
               Rng& rng, double weight_std) {
  if (weight_std < 0) weight_std = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor wt(Shape{in, out});
  rng.fill_normal(wt, 0.0f, static_cast<float>(weight_std));
  w = ps.add_param(name + ".w", wt);
  b = ps.add_param(name + ".b", Tensor(Shape{out}));
}

Var Linear::forward(const Var& x) const { return ops::add(ops::matmul(x, w), b); }

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
               int kernel, int stride_, int pad_, Rng& rng, double weight_std)
    : stride(stride_), pad(pad_) {
  Tensor wt(Shape{out_ch, in_ch, kernel, kernel});
  rng.fill_normal(wt, 0.0f, static_cast<float>(weight_std));
  w = ps.add_param(name + ".w", wt);
  b = ps.add_param(name + ".b", Tensor(Shape{out_ch}));
}

Var Conv2d::forward(const Var& x) const {
  Var y = ops::conv2d(x, w, stride, pad);
  const int64_t c = b->numel();
  return ops::add(y, ops::reshape(b, Shape{1, c, 1, 1}));
}

BatchNorm2d::BatchNorm2d(ParamStore& ps, const std::string& name, int64_t channels_,
                         double momentum_, double eps_)
    : momentum(momentum_), eps(eps_), channels(channels_) {
  running_mean = ps.add_buffer(name + ".running_mean", Tensor(Shape{channels_}));
  running_var = ps.add_buffer(name + ".running_var", Tensor(Shape{channels_}, 1.0f));
}

Var BatchNorm2d::forward(const Var& x, bool training) {
  const Shape& s = x->shape();
  if (s.size() != 4 || s[1] != channels)
    throw ShapeError("BatchNorm2d expects [B," + std::to_string(channels) + ",H,W], got " +
                     shape_str(s));
  const Shape stat_shape{1, channels, 1, 1};
  if (training) {
    const double n = static_cast<double>(s[0] * s[2] * s[3]);
    Var mean = ops::scale(ops::sum_to(x, stat_shape), 1.0 / n);
    Var xc = ops::sub(x, mean);
    Var var = ops::scale(ops::sum_to(ops::mul(xc, xc), stat_shape), 1.0 / n);
    Var inv_std = ops::pow_scalar(ops::add_scalar(var, eps), -0.5);
    // Update running stats outside the graph (unbiased variance).
    {
      NoGradGuard ng;
      const float* pm = mean->value.data();
      const float* pv = var->value.data();
      const double unbias = n > 1 ? n / (n - 1.0) : 1.0;
      for (int64_t c = 0; c < channels; ++c) {
        running_mean.data()[c] = static_cast<float>((1.0 - momentum) * running_mean.data()[c] +
                                                    momentum * pm[c]);
        running_var.data()[c] = static_cast<float>((1.0 - momentum) * running_var.data()[c] +
                                                   momentum * pv[c] * unbias);
      }
    }
    return ops::mul(xc, inv_std);
  }
  Tensor inv(Shape{1, channels, 1, 1});
  Tensor mean(Shape{1, channels, 1, 1});
  for (int64_t c = 0; c < channels; ++c) {
    mean.data()[c] = running_mean.data()[c];
    inv.data()[c] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + eps));
  }
  return ops::mul(ops::sub(x, constant(mean)), constant(inv));
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Var>& grads) {
  if (grads.size() != params_.size())
    throw ContractViolation("Adam::step: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float fb1 = static_cast<float>(beta1_), fb2 = static_cast<float>(beta2_);
  for (size_t i = 0; i < params_.size(); ++i) {
    float* p = params_[i]->value.data();
    const float* g = grads[i]->value.data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    const int64_t n = params_[i]->numel();
    for (int64_t j = 0; j < n; ++j) {
      m[j] = fb1 * m[j] + (1.0f - fb1) * g[j];
      v[j] = fb2 * v[j] + (1.0f - fb2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void Adam::save(BinaryWriter& w) const {
  w.i64(t_);
  w.f64(lr_);
  w.f64(beta1_);
  w.f64(beta2_);
  w.f64(eps_);
  w.u64(m_.size());
  for (size_t i = 0; i < m_.size(); ++i) {
    w.tensor(m_[i]);
    w.tensor(v_[i]);
  }
}

void Adam::load(BinaryReader& r) {
  t_ = r.i64();
  lr_ = r.f64();
  beta1_ = r.f64();
  beta2_ = r.f64();
  eps_ = r.f64();
  uint64_t n = r.u64();
  if (n != m_.size()) throw IoError("Adam state count mismatch");
  for (size_t i = 0; i < m_.size(); ++i) {
    Tensor tm = r.tensor();
    Tensor tv = r.tensor();
    if (tm.shape() != m_[i].shape() || tv.shape() != v_[i].shape())
      throw IoError("Adam state shape mismatch at slot " + std::to_string(i));
    m_[i] = tm;
    v_[i] = tv;
  }
}

}  // namespace fusegan::nn
