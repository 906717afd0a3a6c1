#include "fusegan/losses.hpp"

#include "fusegan/errors.hpp"

namespace fusegan {

namespace op = ops;

void PenaltyConfig::validate() const {
  if (k < 0.0) throw ConfigError("penalty.k must be >= 0");
  if (p < 1.0) throw ConfigError("penalty.p must be >= 1");
}

PenaltyConfig PenaltyConfig::from_config(const Config& c) {
  PenaltyConfig p;
  p.enabled = c.get_bool("penalty.enabled");
  p.k = c.get_double("penalty.k");
  p.p = c.get_double("penalty.p");
  p.validate();
  return p;
}

namespace {
void check_scores(const Var& s, const char* name) {
  if (!s) throw ContractViolation(std::string(name) + ": null scores");
  if (s->numel() == 0)
    throw InvalidInputError(std::string(name) + ": empty score batch");
}

// -E[min(0, -1 + s)], the real-sample hinge term.
Var hinge_real(const Var& s) {
  return op::neg(op::mean_all(op::min_zero(op::add_scalar(s, -1.0))));
}

// -E[min(0, -1 - s)], the fake/mismatch hinge term (unweighted).
Var hinge_other(const Var& s) {
  return op::neg(op::mean_all(op::min_zero(op::neg(op::add_scalar(s, 1.0)))));
}
}  // namespace

Var d_hinge_loss(const Var& s_real_match, const Var& s_fake_match,
                 const Var& s_real_mismatch) {
  check_scores(s_real_match, "d_hinge_loss(real)");
  check_scores(s_fake_match, "d_hinge_loss(fake)");
  check_scores(s_real_mismatch, "d_hinge_loss(mismatch)");
  Var loss = hinge_real(s_real_match);
  loss = op::add(loss, op::scale(hinge_other(s_fake_match), 0.5));
  loss = op::add(loss, op::scale(hinge_other(s_real_mismatch), 0.5));
  return loss;
}

Var g_hinge_loss(const Var& s_fake_match) {
  check_scores(s_fake_match, "g_hinge_loss");
  return op::neg(op::mean_all(s_fake_match));
}

MagpResult ma_gp(const DiscFn& D, const Tensor& x_real_match, const Tensor& e_match,
                 const PenaltyConfig& cfg) {
  cfg.validate();
  if (!grad_enabled())
    throw ContractViolation("ma_gp requires gradient taping to be enabled");
  if (x_real_match.ndim() < 2 || e_match.ndim() != 2 ||
      x_real_match.dim(0) != e_match.dim(0))
    throw InvalidInputError("ma_gp: x and e must share the batch dimension");
  const int64_t batch = x_real_match.dim(0);

  Var x = variable(x_real_match, /*requires_grad=*/true);
  Var e = variable(e_match, /*requires_grad=*/true);
  Var s = D(x, e);
  if (!s || s->numel() != batch)
    throw ContractViolation("ma_gp: handle must return one scalar per sample");

  auto grads = grad(op::sum_all(s), {x, e}, /*create_graph=*/true);
  auto per_sample_norm = [batch](const Var& g) {
    Var flat = op::reshape(g, Shape{batch, -1});
    return op::sqrt(op::sum_to(op::mul(flat, flat), Shape{batch, 1}));
  };
  Var nx = per_sample_norm(grads[0]);
  Var ne = per_sample_norm(grads[1]);
  Var base = op::add(nx, ne);  // [batch,1]
  Var penalty = op::scale(op::sum_all(op::pow_scalar(base, cfg.p)),
                          cfg.k / static_cast<double>(batch));

  double mx = 0.0, me = 0.0;
  for (int64_t i = 0; i < batch; ++i) {
    mx += nx->value.at(i);
    me += ne->value.at(i);
  }
  return {penalty, mx / static_cast<double>(batch), me / static_cast<double>(batch)};
}

namespace {
void require_two_way(const AdversarialLogits& l, const char* who) {
  if (!l.unconditional)
    throw ContractViolation(std::string(who) + " requires two-way logits");
}
}  // namespace

Var two_way_d_loss(const AdversarialLogits& real, const AdversarialLogits& fake,
                   const AdversarialLogits& mismatch) {
  require_two_way(real, "two_way_d_loss");
  require_two_way(fake, "two_way_d_loss");
  Var cond = d_hinge_loss(real.main, fake.main, mismatch.main);
  Var uncond = op::add(hinge_real(*real.unconditional),
                       op::scale(hinge_other(*fake.unconditional), 0.5));
  return op::add(cond, uncond);
}

Var two_way_g_loss(const AdversarialLogits& fake) {
  require_two_way(fake, "two_way_g_loss");
  return op::add(g_hinge_loss(fake.main), g_hinge_loss(*fake.unconditional));
}

std::pair<Var, Var> two_way_loss(const AdversarialLogits& real,
                                 const AdversarialLogits& fake,
                                 const AdversarialLogits& mismatch) {
  return {two_way_d_loss(real, fake, mismatch), two_way_g_loss(fake)};
}

}  // namespace fusegan
