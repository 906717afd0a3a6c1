#pragma once

#include <optional>
#include <vector>

#include "fusegan/config.hpp"
#include "fusegan/nn.hpp"

namespace fusegan {

enum class HeadKind { OneWay, TwoWay };

HeadKind head_kind_from_string(const std::string& s);
std::string to_string(HeadKind k);

struct DiscriminatorConfig {
  int64_t d_e = 128;
  int64_t base_channels = 64;
  int64_t channel_cap = 512;
  int num_downblocks = 4;
  HeadKind head = HeadKind::OneWay;
  double leaky_slope = 0.2;
  uint64_t init_seed = 202;

  int64_t input_resolution() const { return 4ll << num_downblocks; }
  int64_t channels_at_level(int level) const;  // level 0 at full resolution
  int64_t feature_channels() const { return channels_at_level(num_downblocks); }
  void validate() const;

  static DiscriminatorConfig from_config(const Config& c);
};

/// Scores for one batch. `unconditional` is populated only by the two-way
/// head; one-way produces a single conditional scalar per sample.
struct AdversarialLogits {
  Var main;                        // [B]
  std::optional<Var> unconditional;  // [B] iff head == TwoWay
};

/// Halves spatial extent with a strided convolution on the main path and an
/// average-pool shortcut (1x1-projected on channel change).
class DownBlock {
 public:
  DownBlock(nn::ParamStore& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
            double slope, Rng& rng);
  Var forward(const Var& x) const;

 private:
  nn::Conv2d c1_, c2_;
  std::optional<nn::Conv2d> shortcut_;
  double slope_;
};

class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig cfg);

  /// images [B,3,R,R] with R = 4 * 2^num_downblocks -> [B,C_f,4,4].
  Var extract_features(const Var& images) const;

  /// Replicated-e concat head: two convolutions to one scalar per sample.
  AdversarialLogits one_way_logit(const Var& feat, const Var& e) const;

  /// Legacy ablation head: unconditional scalar from features alone plus a
  /// conditional scalar from the concatenated path.
  AdversarialLogits two_way_logits(const Var& feat, const Var& e) const;

  /// Head dispatch per config.
  AdversarialLogits logits(const Var& images, const Var& e) const;

  /// The scalar this discriminator drives training with: the one-way output,
  /// or conditional + unconditional for the two-way ablation. This is the
  /// evaluation handle the gradient penalty differentiates.
  Var score(const Var& images, const Var& e) const;

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  nn::ParamStore ps_;
  nn::Conv2d from_rgb_;
  std::vector<DownBlock> blocks_;
  nn::Conv2d cond_a_, cond_b_;                     // conditional head
  std::optional<nn::Conv2d> uncond_a_, uncond_b_;  // two-way only
};

}  // namespace fusegan
