#pragma once

#include <optional>
#include <vector>

#include "fusegan/config.hpp"
#include "fusegan/nn.hpp"

namespace fusegan {

enum class FusionKind { Concat, Cbn, Aff, Df };

FusionKind fusion_kind_from_string(const std::string& s);
std::string to_string(FusionKind k);

struct GeneratorConfig {
  int64_t d_e = 128;
  int64_t d_z = 100;
  int64_t base_channels = 64;
  int64_t channel_cap = 512;
  int num_upblocks = 4;
  FusionKind fusion = FusionKind::Df;
  bool skip_z = true;
  int64_t mlp_hidden = 0;  // 0 -> d_e
  uint64_t init_seed = 101;

  int64_t output_resolution() const { return 4ll << num_upblocks; }
  int64_t latent_dim() const { return skip_z ? d_e + d_z : d_z; }
  int64_t channels_at_level(int level) const;  // level 0 is the 4x4 map
  int64_t hidden() const { return mlp_hidden > 0 ? mlp_hidden : d_e; }
  void validate() const;

  static GeneratorConfig from_config(const Config& c);
};

/// Channel-wise modulation: out[b,i,h,w] = gamma[i] * x[b,i,h,w] + beta[i].
/// gamma/beta may be [C] (shared) or [B,C] (per-sample).
Var affine_modulate(const Var& x, const Var& gamma, const Var& beta);

/// Two one-hidden-layer MLPs predicting per-channel scale and shift from the
/// sentence embedding.
class AffinePredictor {
 public:
  AffinePredictor() = default;
  AffinePredictor(nn::ParamStore& ps, const std::string& name, int64_t d_e,
                  int64_t hidden, int64_t channels, Rng& rng);
  std::pair<Var, Var> forward(const Var& e) const;  // gamma, beta: [B,C]

 private:
  nn::Linear g1_, g2_, b1_, b2_;
};

/// One text-image fusion stage. The four variants share the call signature
/// so the generator is agnostic to which one conditions it:
///   Concat: replicate e spatially, channel-concat, mix with a 1x1 conv
///   Cbn:    batch norm then one conditional affine
///   Aff:    one conditional affine, no normalization
///   Df:     two stacked (affine -> ReLU) pairs
class FusionBlock {
 public:
  FusionBlock(nn::ParamStore& ps, const std::string& name, FusionKind kind,
              int64_t channels, int64_t d_e, int64_t hidden, Rng& rng);
  Var forward(const Var& x, const Var& e, bool training);
  FusionKind kind() const { return kind_; }

 private:
  FusionKind kind_;
  std::optional<AffinePredictor> a1_, a2_;
  std::optional<nn::BatchNorm2d> bn_;
  std::optional<nn::Conv2d> mix_;
};

/// Upsample x2, then a residual block whose main path runs two fusion
/// stages interleaved with 3x3 convolutions. The shortcut is a 1x1
/// convolution when the channel count changes.
class UpBlock {
 public:
  UpBlock(nn::ParamStore& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
          FusionKind kind, int64_t d_e, int64_t hidden, Rng& rng);
  Var forward(const Var& x, const Var& e, bool training);

 private:
  FusionBlock f1_, f2_;
  nn::Conv2d c1_, c2_;
  std::optional<nn::Conv2d> shortcut_;
  FusionKind kind_;
};

class Generator {
 public:
  explicit Generator(GeneratorConfig cfg);

  /// latent [B, latent_dim], e [B, d_e] -> images [B,3,R,R] in [-1,1].
  Var forward(const Var& latent, const Var& e, bool training);

  /// Convenience inference path: builds the latent from (z, e) according to
  /// skip_z and runs without taping.
  Tensor generate(const Tensor& z, const Tensor& e);

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  nn::ParamStore ps_;
  nn::Linear fc_;
  std::vector<UpBlock> blocks_;
  nn::Conv2d to_rgb_;
};

}  // namespace fusegan
