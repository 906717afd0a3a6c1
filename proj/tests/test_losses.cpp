#include <doctest.h>

#include <cmath>

#include "fusegan/errors.hpp"
#include "fusegan/losses.hpp"

using namespace fusegan;
namespace op = fusegan::ops;

namespace {
Var scores(std::vector<float> v) {
  const int64_t n = static_cast<int64_t>(v.size());
  return constant(Tensor(Shape{n}, std::move(v)));
}
}  // namespace

TEST_CASE("d_hinge_loss truth table") {
  CHECK(d_hinge_loss(scores({1}), scores({-1}), scores({-1}))->value.item() == 0.0f);
  CHECK(d_hinge_loss(scores({0}), scores({0}), scores({0}))->value.item() == 2.0f);
  CHECK(d_hinge_loss(scores({2}), scores({-3}), scores({-5}))->value.item() == 0.0f);
  CHECK_THROWS_AS(d_hinge_loss(scores({}), scores({0}), scores({0})), InvalidInputError);
}

TEST_CASE("g_hinge_loss truth table") {
  CHECK(g_hinge_loss(scores({0, 0}))->value.item() == 0.0f);
  CHECK(g_hinge_loss(scores({1, 3}))->value.item() == -2.0f);
  CHECK(g_hinge_loss(scores({-5}))->value.item() == 5.0f);
  CHECK_THROWS_AS(g_hinge_loss(scores({})), InvalidInputError);
}

TEST_CASE("d_hinge_loss monotonicity under perturbation") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = 4;
    Tensor rm(Shape{n}), fm(Shape{n}), mm(Shape{n});
    rng.fill_uniform(rm, -2.0f, 2.0f);
    rng.fill_uniform(fm, -2.0f, 2.0f);
    rng.fill_uniform(mm, -2.0f, 2.0f);
    const double base =
        d_hinge_loss(constant(rm), constant(fm), constant(mm))->value.item();
    const int64_t i = rng.uniform_int(n);

    Tensor rm2 = rm.clone();
    rm2.data()[i] += 0.5f;  // larger real score never increases the loss
    CHECK(d_hinge_loss(constant(rm2), constant(fm), constant(mm))->value.item() <=
          base + 1e-6);
    Tensor fm2 = fm.clone();
    fm2.data()[i] += 0.5f;  // larger fake score never decreases it
    CHECK(d_hinge_loss(constant(rm), constant(fm2), constant(mm))->value.item() >=
          base - 1e-6);
    Tensor mm2 = mm.clone();
    mm2.data()[i] += 0.5f;
    CHECK(d_hinge_loss(constant(rm), constant(fm), constant(mm2))->value.item() >=
          base - 1e-6);
  }
}

TEST_CASE("ma_gp: constant discriminator has zero penalty") {
  PenaltyConfig cfg;
  cfg.k = 3.0;
  cfg.p = 6.0;
  Tensor x(Shape{2, 3, 4, 4}, 0.5f);
  Tensor e(Shape{2, 5}, 0.1f);
  DiscFn constant_d = [](const Var& xs, const Var&) {
    return constant(Tensor(Shape{xs->shape()[0]}, 7.0f));
  };
  MagpResult r = ma_gp(constant_d, x, e, cfg);
  CHECK(r.penalty->value.item() == 0.0f);
  CHECK(r.mean_grad_norm_x == 0.0);
  CHECK(r.mean_grad_norm_e == 0.0);
}

TEST_CASE("ma_gp: linear discriminator closed forms") {
  // D(x,e) = <w, x> with ||w|| = 2 and no e term; k=2, p=6 -> 2 * 2^6 = 128.
  Tensor w(Shape{2, 3, 2, 2});  // per-sample weight, norm 2: four entries of 1
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t i = 0; i < 4; ++i) w.data()[b * 12 + i] = 1.0f;
  DiscFn lin_x = [&](const Var& xs, const Var&) {
    Var flat_x = ops::reshape(xs, Shape{2, 12});
    Var flat_w = ops::reshape(constant(w), Shape{2, 12});
    return ops::reshape(ops::sum_to(ops::mul(flat_x, flat_w), Shape{2, 1}), Shape{2});
  };
  PenaltyConfig cfg;
  cfg.k = 2.0;
  cfg.p = 6.0;
  Tensor x(Shape{2, 3, 2, 2}, 0.25f);
  Tensor e(Shape{2, 4}, 0.5f);
  MagpResult r = ma_gp(lin_x, x, e, cfg);
  CHECK(r.penalty->value.item() == doctest::Approx(128.0).epsilon(1e-6));
  CHECK(r.mean_grad_norm_x == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.mean_grad_norm_e == 0.0);

  // D(x,e) = <a,x> + <b,e> with ||a|| = ||b|| = 1, k=1, p=2 -> (1+1)^2 = 4.
  DiscFn lin_xe = [&](const Var& xs, const Var& es) {
    Var sx = ops::sum_to(ops::slice(ops::reshape(xs, Shape{2, 12}), 1, 0, 1), Shape{2, 1});
    Var se = ops::sum_to(ops::slice(es, 1, 0, 1), Shape{2, 1});
    return ops::reshape(ops::add(sx, se), Shape{2});
  };
  PenaltyConfig cfg2;
  cfg2.k = 1.0;
  cfg2.p = 2.0;
  MagpResult r2 = ma_gp(lin_xe, x, e, cfg2);
  CHECK(r2.penalty->value.item() == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("ma_gp scales linearly in k and is exact at p=1") {
  Rng rng(23);
  Tensor w(Shape{1, 3, 4, 4});
  rng.fill_normal(w);
  DiscFn lin = [&](const Var& xs, const Var&) {
    Var flat_x = ops::reshape(xs, Shape{1, 48});
    Var flat_w = ops::reshape(constant(w), Shape{1, 48});
    return ops::reshape(ops::sum_to(ops::mul(flat_x, flat_w), Shape{1, 1}), Shape{1});
  };
  Tensor x(Shape{1, 3, 4, 4}, 0.1f);
  Tensor e(Shape{1, 2}, 0.0f);
  double wn = 0.0;
  for (int64_t i = 0; i < w.numel(); ++i) wn += static_cast<double>(w.at(i)) * w.at(i);
  wn = std::sqrt(wn);

  PenaltyConfig c1;
  c1.k = 1.5;
  c1.p = 1.0;
  MagpResult r1 = ma_gp(lin, x, e, c1);
  CHECK(r1.penalty->value.item() == doctest::Approx(1.5 * wn).epsilon(1e-5));

  PenaltyConfig c2 = c1;
  c2.k = 3.0;
  MagpResult r2 = ma_gp(lin, x, e, c2);
  CHECK(r2.penalty->value.item() ==
        doctest::Approx(2.0 * r1.penalty->value.item()).epsilon(1e-6));
}

TEST_CASE("ma_gp penalty is differentiable w.r.t. discriminator parameters") {
  // phi(theta) = ma_gp of D(x,e) = <theta, x>; d phi / d theta must match
  // finite differences (k=1, p=2 gives phi = ||theta||^2 exactly).
  Tensor theta_t(Shape{1, 12});
  Rng rng(29);
  rng.fill_normal(theta_t);
  Var theta = variable(theta_t, true);
  PenaltyConfig cfg;
  cfg.k = 1.0;
  cfg.p = 2.0;
  Tensor x(Shape{1, 3, 2, 2}, 0.3f);
  Tensor e(Shape{1, 2}, 0.1f);
  DiscFn lin = [&](const Var& xs, const Var&) {
    Var flat_x = ops::reshape(xs, Shape{1, 12});
    return ops::reshape(ops::sum_to(ops::mul(flat_x, theta), Shape{1, 1}), Shape{1});
  };
  MagpResult r = ma_gp(lin, x, e, cfg);
  auto g = grad(r.penalty, {theta});
  for (int64_t i = 0; i < 12; ++i)
    CHECK(g[0]->value.at(i) == doctest::Approx(2.0 * theta_t.at(i)).epsilon(1e-4));
}

TEST_CASE("ma_gp contract checks") {
  PenaltyConfig cfg;
  Tensor x(Shape{2, 3, 2, 2}, 0.1f);
  Tensor e(Shape{2, 2}, 0.1f);
  DiscFn ok = [](const Var& xs, const Var&) {
    return constant(Tensor(Shape{xs->shape()[0]}, 0.0f));
  };
  NoGradGuard ng;
  CHECK_THROWS_AS(ma_gp(ok, x, e, cfg), ContractViolation);
}

namespace {
AdversarialLogits two_way(std::vector<float> cond, std::vector<float> uncond) {
  AdversarialLogits l;
  l.main = scores(std::move(cond));
  l.unconditional = scores(std::move(uncond));
  return l;
}
}  // namespace

TEST_CASE("two_way_loss saturation, zeroed branch, and doubling") {
  // every branch saturated: total is exactly zero
  auto [d0, g0] = two_way_loss(two_way({2}, {3}), two_way({-2}, {-3}), two_way({-2}, {0}));
  CHECK(d0->value.item() == 0.0f);

  // conditional branch constant zero: total = unconditional hinge + the
  // constant-branch hinge value
  auto real = two_way({0}, {1});
  auto fake = two_way({0}, {-1});
  auto mis = two_way({0}, {0});
  Var d1 = two_way_d_loss(real, fake, mis);
  // conditional hinge at zero scores = 2; unconditional branch saturated = 0
  CHECK(d1->value.item() == 2.0f);

  // symmetric scores in both branches with mismatch saturated: d loss is
  // exactly twice the one-branch value
  auto realb = two_way({0.25f}, {0.25f});
  auto fakeb = two_way({-0.5f}, {-0.5f});
  auto misb = two_way({-9}, {7});
  const double one_branch =
      -std::min(0.0, -1.0 + 0.25) - 0.5 * std::min(0.0, -1.0 - (-0.5));
  Var d2 = two_way_d_loss(realb, fakeb, misb);
  CHECK(d2->value.item() == doctest::Approx(2.0 * one_branch).epsilon(1e-6));

  // generator side sums both branches
  auto gl = two_way_g_loss(two_way({1, 3}, {2, 4}));
  CHECK(gl->value.item() == doctest::Approx(-5.0).epsilon(1e-6));

  // one-way logits rejected
  AdversarialLogits ow;
  ow.main = scores({0.0f});
  CHECK_THROWS_AS(two_way_d_loss(ow, ow, ow), ContractViolation);
  CHECK_THROWS_AS(two_way_g_loss(ow), ContractViolation);
}
