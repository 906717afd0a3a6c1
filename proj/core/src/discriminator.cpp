#include "fusegan/discriminator.hpp"

#include "fusegan/errors.hpp"

namespace fusegan {

namespace op = ops;

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "one_way") return HeadKind::OneWay;
  if (s == "two_way") return HeadKind::TwoWay;
  throw ConfigError("unknown head kind '" + s + "' (expected one_way|two_way)");
}

std::string to_string(HeadKind k) {
  return k == HeadKind::OneWay ? "one_way" : "two_way";
}

int64_t DiscriminatorConfig::channels_at_level(int level) const {
  return std::min<int64_t>(base_channels << level, channel_cap);
}

void DiscriminatorConfig::validate() const {
  if (d_e < 0) throw ConfigError("discriminator: d_e must be >= 0");
  if (base_channels < 1 || channel_cap < base_channels)
    throw ConfigError("discriminator: bad channel plan");
  if (num_downblocks < 1 || num_downblocks > 8)
    throw ConfigError("discriminator: num_downblocks out of range [1,8]");
}

DiscriminatorConfig DiscriminatorConfig::from_config(const Config& c) {
  DiscriminatorConfig d;
  d.d_e = c.get_int("model.d_e");
  d.base_channels = c.get_int("discriminator.base_channels");
  d.channel_cap = c.get_int("discriminator.channel_cap");
  d.num_downblocks = static_cast<int>(c.get_int("discriminator.num_downblocks"));
  d.head = head_kind_from_string(c.get("discriminator.head"));
  d.leaky_slope = c.get_double("discriminator.leaky_slope");
  d.init_seed = static_cast<uint64_t>(c.get_int("discriminator.init_seed"));
  d.validate();
  return d;
}

DownBlock::DownBlock(nn::ParamStore& ps, const std::string& name, int64_t in_ch,
                     int64_t out_ch, double slope, Rng& rng)
    : c1_(ps, name + ".conv1", in_ch, out_ch, 3, 1, 1, rng),
      c2_(ps, name + ".conv2", out_ch, out_ch, 3, 2, 1, rng),
      slope_(slope) {
  if (in_ch != out_ch) shortcut_.emplace(ps, name + ".shortcut", in_ch, out_ch, 1, 1, 0, rng);
}

Var DownBlock::forward(const Var& x) const {
  Var h = op::leaky_relu(c1_.forward(x), slope_);
  h = op::leaky_relu(c2_.forward(h), slope_);
  Var pooled = op::avg_pool2(x);
  Var shortcut = shortcut_ ? shortcut_->forward(pooled) : pooled;
  return op::add(shortcut, h);
}

Discriminator::Discriminator(DiscriminatorConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  from_rgb_ = nn::Conv2d(ps_, "from_rgb", 3, cfg_.channels_at_level(0), 3, 1, 1, rng);
  blocks_.reserve(static_cast<size_t>(cfg_.num_downblocks));
  for (int i = 0; i < cfg_.num_downblocks; ++i)
    blocks_.emplace_back(ps_, "down" + std::to_string(i), cfg_.channels_at_level(i),
                         cfg_.channels_at_level(i + 1), cfg_.leaky_slope, rng);
  const int64_t cf = cfg_.feature_channels();
  cond_a_ = nn::Conv2d(ps_, "head.cond.conv1", cf + cfg_.d_e, cf, 3, 1, 1, rng);
  cond_b_ = nn::Conv2d(ps_, "head.cond.conv2", cf, 1, 4, 1, 0, rng);
  if (cfg_.head == HeadKind::TwoWay) {
    uncond_a_.emplace(ps_, "head.uncond.conv1", cf, cf, 3, 1, 1, rng);
    uncond_b_.emplace(ps_, "head.uncond.conv2", cf, 1, 4, 1, 0, rng);
  }
}

Var Discriminator::extract_features(const Var& images) const {
  const Shape& s = images->shape();
  const int64_t want = cfg_.input_resolution();
  if (s.size() != 4 || s[1] != 3 || s[2] != want || s[3] != want)
    throw ShapeError("discriminator expects [B,3," + std::to_string(want) + "," +
                     std::to_string(want) + "], got " + shape_str(s));
  Var h = op::leaky_relu(from_rgb_.forward(images), cfg_.leaky_slope);
  for (const auto& blk : blocks_) h = blk.forward(h);
  return h;
}

namespace {
Var head_scalar(const nn::Conv2d& a, const nn::Conv2d& b, const Var& x, double slope) {
  Var h = op::leaky_relu(a.forward(x), slope);
  h = b.forward(h);  // 4x4 valid conv -> [B,1,1,1]
  return op::reshape(h, Shape{x->shape()[0]});
}
}  // namespace

AdversarialLogits Discriminator::one_way_logit(const Var& feat, const Var& e) const {
  const Shape& fs = feat->shape();
  if (e->shape().size() != 2 || e->shape()[0] != fs[0])
    throw InvalidInputError("one_way_logit: batch mismatch feat " + shape_str(fs) +
                            " vs e " + shape_str(e->shape()));
  const int64_t d_e = e->shape()[1];
  Var rep = op::broadcast_to(op::reshape(e, Shape{fs[0], d_e, 1, 1}),
                             Shape{fs[0], d_e, fs[2], fs[3]});
  Var joint = op::concat({feat, rep}, 1);
  return {head_scalar(cond_a_, cond_b_, joint, cfg_.leaky_slope), std::nullopt};
}

AdversarialLogits Discriminator::two_way_logits(const Var& feat, const Var& e) const {
  if (cfg_.head != HeadKind::TwoWay)
    throw ContractViolation("two_way_logits called on a one-way discriminator");
  AdversarialLogits out = one_way_logit(feat, e);
  out.unconditional = head_scalar(*uncond_a_, *uncond_b_, feat, cfg_.leaky_slope);
  return out;
}

AdversarialLogits Discriminator::logits(const Var& images, const Var& e) const {
  Var feat = extract_features(images);
  return cfg_.head == HeadKind::OneWay ? one_way_logit(feat, e)
                                       : two_way_logits(feat, e);
}

Var Discriminator::score(const Var& images, const Var& e) const {
  AdversarialLogits l = logits(images, e);
  if (l.unconditional) return op::add(l.main, *l.unconditional);
  return l.main;
}

}  // namespace fusegan
