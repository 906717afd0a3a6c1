#pragma once

#include <functional>

#include "fusegan/autodiff.hpp"
#include "fusegan/config.hpp"
#include "fusegan/discriminator.hpp"

namespace fusegan {

struct PenaltyConfig {
  double k = 2.0;
  double p = 6.0;
  bool enabled = true;

  void validate() const;
  static PenaltyConfig from_config(const Config& c);
};

/// Discriminator hinge loss over the three pair populations:
///   -E[min(0,-1+s_rm)] - 1/2 E[min(0,-1-s_fm)] - 1/2 E[min(0,-1-s_rmm)]
Var d_hinge_loss(const Var& s_real_match, const Var& s_fake_match,
                 const Var& s_real_mismatch);

/// Generator hinge loss: -E[s_fake_match].
Var g_hinge_loss(const Var& s_fake_match);

/// Evaluation handle the penalty differentiates: (images, embeddings) -> [B].
using DiscFn = std::function<Var(const Var& images, const Var& embeddings)>;

struct MagpResult {
  Var penalty;             // k * E[(||grad_x D|| + ||grad_e D||)^p], taped
  double mean_grad_norm_x; // batch means of the per-sample L2 norms
  double mean_grad_norm_e;
};

/// Matching-aware gradient penalty. Applied to (real image, matching
/// embedding) pairs only — the caller supplies exactly that population.
/// The returned penalty stays differentiable with respect to the
/// discriminator parameters.
MagpResult ma_gp(const DiscFn& D, const Tensor& x_real_match,
                 const Tensor& e_match, const PenaltyConfig& cfg);

/// Two-way ablation losses. The conditional branch carries all three
/// populations; the unconditional branch sees real vs fake only (mismatched
/// images are still real images). The 1/2 factors on fake and mismatch terms
/// are kept identical to the one-way loss so the head is the only variable.
Var two_way_d_loss(const AdversarialLogits& real, const AdversarialLogits& fake,
                   const AdversarialLogits& mismatch);
Var two_way_g_loss(const AdversarialLogits& fake);

/// Both losses from one fake/real/mismatch triple, (d_loss, g_loss).
std::pair<Var, Var> two_way_loss(const AdversarialLogits& real,
                                 const AdversarialLogits& fake,
                                 const AdversarialLogits& mismatch);

}  // namespace fusegan
