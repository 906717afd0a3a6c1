#include "fusegan/generator.hpp"

#include <cassert>

#include "fusegan/conditioning.hpp"
#include "fusegan/errors.hpp"

namespace fusegan {

namespace op = ops;

FusionKind fusion_kind_from_string(const std::string& s) {
  if (s == "concat") return FusionKind::Concat;
  if (s == "cbn") return FusionKind::Cbn;
  if (s == "aff") return FusionKind::Aff;
  if (s == "df") return FusionKind::Df;
  throw ConfigError("unknown fusion kind '" + s + "' (expected concat|cbn|aff|df)");
}

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::Concat: return "concat";
    case FusionKind::Cbn: return "cbn";
    case FusionKind::Aff: return "aff";
    case FusionKind::Df: return "df";
  }
  return "?";
}

int64_t GeneratorConfig::channels_at_level(int level) const {
  const int64_t raw = base_channels << (num_upblocks - level);
  return std::min<int64_t>(raw, channel_cap);
}

void GeneratorConfig::validate() const {
  if (d_e < 0 || d_z < 1) throw ConfigError("generator: d_e must be >= 0, d_z >= 1");
  if (base_channels < 1 || channel_cap < base_channels)
    throw ConfigError("generator: bad channel plan");
  if (num_upblocks < 1 || num_upblocks > 8)
    throw ConfigError("generator: num_upblocks out of range [1,8]");
}

GeneratorConfig GeneratorConfig::from_config(const Config& c) {
  GeneratorConfig g;
  g.d_e = c.get_int("model.d_e");
  g.d_z = c.get_int("model.d_z");
  g.base_channels = c.get_int("generator.base_channels");
  g.channel_cap = c.get_int("generator.channel_cap");
  g.num_upblocks = static_cast<int>(c.get_int("generator.num_upblocks"));
  g.fusion = fusion_kind_from_string(c.get("generator.fusion"));
  g.skip_z = c.get_bool("generator.skip_z");
  g.mlp_hidden = c.get_int("generator.mlp_hidden");
  g.init_seed = static_cast<uint64_t>(c.get_int("generator.init_seed"));
  g.validate();
  return g;
}

Var affine_modulate(const Var& x, const Var& gamma, const Var& beta) {
  const Shape& xs = x->shape();
  if (xs.size() != 4) throw ShapeError("affine_modulate expects [B,C,H,W]");
  const int64_t c = xs[1];
  auto as_param = [&](const Var& p, const char* which) {
    const Shape& s = p->shape();
    if (s.size() == 1) {
      if (s[0] != c)
        throw ShapeError(std::string(which) + " has " + std::to_string(s[0]) +
                         " channels, feature map has " + std::to_string(c));
      return op::reshape(p, Shape{1, c, 1, 1});
    }
    if (s.size() == 2) {
      if (s[1] != c || s[0] != xs[0])
        throw ShapeError(std::string(which) + " shape " + shape_str(s) +
                         " does not match feature map " + shape_str(xs));
      return op::reshape(p, Shape{s[0], c, 1, 1});
    }
    throw ShapeError(std::string(which) + " must be [C] or [B,C]");
  };
  return op::add(op::mul(x, as_param(gamma, "gamma")), as_param(beta, "beta"));
}

AffinePredictor::AffinePredictor(nn::ParamStore& ps, const std::string& name,
                                 int64_t d_e, int64_t hidden, int64_t channels,
                                 Rng& rng)
    : g1_(ps, name + ".gamma.fc1", d_e, hidden, rng),
      g2_(ps, name + ".gamma.fc2", hidden, channels, rng),
      b1_(ps, name + ".beta.fc1", d_e, hidden, rng),
      b2_(ps, name + ".beta.fc2", hidden, channels, rng) {}

std::pair<Var, Var> AffinePredictor::forward(const Var& e) const {
  Var gamma = g2_.forward(op::relu(g1_.forward(e)));
  Var beta = b2_.forward(op::relu(b1_.forward(e)));
  return {gamma, beta};
}

FusionBlock::FusionBlock(nn::ParamStore& ps, const std::string& name, FusionKind kind,
                         int64_t channels, int64_t d_e, int64_t hidden, Rng& rng)
    : kind_(kind) {
  switch (kind) {
    case FusionKind::Df:
      a1_.emplace(ps, name + ".aff1", d_e, hidden, channels, rng);
      a2_.emplace(ps, name + ".aff2", d_e, hidden, channels, rng);
      break;
    case FusionKind::Aff:
      a1_.emplace(ps, name + ".aff", d_e, hidden, channels, rng);
      break;
    case FusionKind::Cbn:
      bn_.emplace(ps, name + ".bn", channels);
      a1_.emplace(ps, name + ".aff", d_e, hidden, channels, rng);
      break;
    case FusionKind::Concat:
      mix_.emplace(ps, name + ".mix", channels + d_e, channels, 1, 1, 0, rng);
      break;
  }
}

Var FusionBlock::forward(const Var& x, const Var& e, bool training) {
  switch (kind_) {
    case FusionKind::Df: {
      auto [g1, b1] = a1_->forward(e);
      Var h = op::relu(affine_modulate(x, g1, b1));
      auto [g2, b2] = a2_->forward(e);
      return op::relu(affine_modulate(h, g2, b2));
    }
    case FusionKind::Aff: {
      auto [g, b] = a1_->forward(e);
      return affine_modulate(x, g, b);
    }
    case FusionKind::Cbn: {
      Var h = bn_->forward(x, training);
      auto [g, b] = a1_->forward(e);
      return affine_modulate(h, g, b);
    }
    case FusionKind::Concat: {
      const Shape& s = x->shape();
      const int64_t d_e = e->shape()[1];
      Var rep = op::broadcast_to(op::reshape(e, Shape{s[0], d_e, 1, 1}),
                                 Shape{s[0], d_e, s[2], s[3]});
      return mix_->forward(op::concat({x, rep}, 1));
    }
  }
  throw ContractViolation("unreachable fusion kind");
}

UpBlock::UpBlock(nn::ParamStore& ps, const std::string& name, int64_t in_ch,
                 int64_t out_ch, FusionKind kind, int64_t d_e, int64_t hidden, Rng& rng)
    : f1_(ps, name + ".fuse1", kind, in_ch, d_e, hidden, rng),
      f2_(ps, name + ".fuse2", kind, out_ch, d_e, hidden, rng),
      c1_(ps, name + ".conv1", in_ch, out_ch, 3, 1, 1, rng),
      c2_(ps, name + ".conv2", out_ch, out_ch, 3, 1, 1, rng),
      kind_(kind) {
  if (in_ch != out_ch) shortcut_.emplace(ps, name + ".shortcut", in_ch, out_ch, 1, 1, 0, rng);
}

Var UpBlock::forward(const Var& x, const Var& e, bool training) {
  Var up = op::upsample_nearest2(x);
  Var shortcut = shortcut_ ? shortcut_->forward(up) : up;
  // Df fusion already ends rectified; the other variants end linear and get
  // their nonlinearity here.
  Var h = f1_.forward(up, e, training);
  if (kind_ != FusionKind::Df) h = op::relu(h);
  h = c1_.forward(h);
  h = f2_.forward(h, e, training);
  if (kind_ != FusionKind::Df) h = op::relu(h);
  h = c2_.forward(h);
  Var out = op::add(shortcut, h);
  assert(out->value.all_finite());
  return out;
}

Generator::Generator(GeneratorConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  const int64_t c0 = cfg_.channels_at_level(0);
  fc_ = nn::Linear(ps_, "fc", cfg_.latent_dim(), c0 * 4 * 4, rng);
  blocks_.reserve(static_cast<size_t>(cfg_.num_upblocks));
  for (int i = 0; i < cfg_.num_upblocks; ++i) {
    blocks_.emplace_back(ps_, "up" + std::to_string(i), cfg_.channels_at_level(i),
                         cfg_.channels_at_level(i + 1), cfg_.fusion, cfg_.d_e,
                         cfg_.hidden(), rng);
  }
  to_rgb_ = nn::Conv2d(ps_, "to_rgb", cfg_.channels_at_level(cfg_.num_upblocks), 3, 3, 1,
                       1, rng);
}

Var Generator::forward(const Var& latent, const Var& e, bool training) {
  const Shape& ls = latent->shape();
  if (ls.size() != 2 || ls[1] != cfg_.latent_dim())
    throw ShapeError("generator latent must be [B," + std::to_string(cfg_.latent_dim()) +
                     "], got " + shape_str(ls));
  if (e->shape() != Shape{ls[0], cfg_.d_e})
    throw InvalidInputError("generator: embedding batch mismatch, latent " +
                            shape_str(ls) + " vs e " + shape_str(e->shape()));
  Var h = fc_.forward(latent);
  h = op::reshape(h, Shape{ls[0], cfg_.channels_at_level(0), 4, 4});
  for (auto& blk : blocks_) h = blk.forward(h, e, training);
  return op::tanh(to_rgb_.forward(h));
}

Tensor Generator::generate(const Tensor& z, const Tensor& e) {
  if (z.ndim() != 2 || e.ndim() != 2 || z.dim(0) != e.dim(0))
    throw InvalidInputError("generate: z and e must be 2-D with equal batch");
  NoGradGuard ng;
  Tensor latent = cfg_.skip_z ? skip_z_concat(e, z) : z;
  Var img = forward(constant(latent), constant(e), /*training=*/false);
  return img->value;
}

}  // namespace fusegan
