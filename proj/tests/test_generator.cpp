#include <doctest.h>

#include <cmath>

#include "fusegan/conditioning.hpp"
#include "fusegan/errors.hpp"
#include "fusegan/generator.hpp"
#include "test_helpers.hpp"

using namespace fusegan;
using namespace fusegan::testing;
namespace op = fusegan::ops;

TEST_CASE("predict_affine: zeroed MLPs give zero scale and shift") {
  nn::ParamStore ps;
  Rng rng(1);
  AffinePredictor pred(ps, "p", 4, 4, 3, rng);
  for (const auto& p : ps.params()) fill_param(p.var, 0.0f);
  Tensor e(Shape{2, 4}, {1, -2, 3, 4, 0, 1, 2, 3});
  auto [gamma, beta] = pred.forward(constant(e));
  for (int64_t i = 0; i < gamma->numel(); ++i) {
    CHECK(gamma->value.at(i) == 0.0f);
    CHECK(beta->value.at(i) == 0.0f);
  }
}

TEST_CASE("predict_affine: hand-set tiny MLP matches closed form") {
  nn::ParamStore ps;
  Rng rng(1);
  AffinePredictor pred(ps, "p", 2, 2, 1, rng);
  set_param(find_param(ps, "p.gamma.fc1.w"), {1, 0, 0, 1});
  set_param(find_param(ps, "p.gamma.fc1.b"), {0.5f, -1.0f});
  set_param(find_param(ps, "p.gamma.fc2.w"), {2, -3});
  set_param(find_param(ps, "p.gamma.fc2.b"), {0.25f});
  set_param(find_param(ps, "p.beta.fc1.w"), {1, 0, 0, 1});
  set_param(find_param(ps, "p.beta.fc1.b"), {0, 0});
  set_param(find_param(ps, "p.beta.fc2.w"), {1, 1});
  set_param(find_param(ps, "p.beta.fc2.b"), {-0.5f});

  Tensor e(Shape{1, 2}, {0.3f, 0.7f});
  auto [gamma, beta] = pred.forward(constant(e));
  // gamma = 2*relu(0.3+0.5) - 3*relu(0.7-1) + 0.25 = 1.85
  CHECK(gamma->value.item() == doctest::Approx(1.85).epsilon(1e-6));
  // beta = relu(0.3) + relu(0.7) - 0.5 = 0.5
  CHECK(beta->value.item() == doctest::Approx(0.5).epsilon(1e-6));

  auto [g2, b2] = pred.forward(constant(e));
  CHECK(g2->value.item() == gamma->value.item());
  CHECK(b2->value.item() == beta->value.item());
}

TEST_CASE("affine: identity, constant-shift, and the worked example") {
  Tensor xt(Shape{1, 2, 1, 2}, {1, 2, 3, 4});
  Var x = constant(xt);

  Var id = affine_modulate(x, constant(Tensor(Shape{2}, {1, 1})),
                           constant(Tensor(Shape{2}, {0, 0})));
  for (int64_t i = 0; i < 4; ++i) CHECK(id->value.at(i) == xt.at(i));

  Var shift = affine_modulate(x, constant(Tensor(Shape{2}, {0, 0})),
                              constant(Tensor(Shape{2}, {5, -3})));
  CHECK(shift->value.at(0) == 5.0f);
  CHECK(shift->value.at(1) == 5.0f);
  CHECK(shift->value.at(2) == -3.0f);
  CHECK(shift->value.at(3) == -3.0f);

  Var y = affine_modulate(x, constant(Tensor(Shape{2}, {2, 0.5f})),
                          constant(Tensor(Shape{2}, {1, -1})));
  CHECK(y->value.at(0) == 3.0f);
  CHECK(y->value.at(1) == 5.0f);
  CHECK(y->value.at(2) == 0.5f);
  CHECK(y->value.at(3) == 1.0f);

  CHECK_THROWS_AS(
      affine_modulate(x, constant(Tensor(Shape{3}, {1, 1, 1})),
                      constant(Tensor(Shape{2}, {0, 0}))),
      ShapeError);
}

TEST_CASE("affine: elementwise oracle over random triples") {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor xt(Shape{2, 3, 2, 2});
    Tensor gt(Shape{2, 3});
    Tensor bt(Shape{2, 3});
    rng.fill_normal(xt);
    rng.fill_normal(gt);
    rng.fill_normal(bt);
    Var y = affine_modulate(constant(xt), constant(gt), constant(bt));
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t s = 0; s < 4; ++s) {
          const int64_t i = (b * 3 + c) * 4 + s;
          const double want = static_cast<double>(gt.at(b * 3 + c)) * xt.at(i) +
                              bt.at(b * 3 + c);
          CHECK(y->value.at(i) == doctest::Approx(want).epsilon(1e-5));
        }
  }
}

TEST_CASE("affine: finite-difference gradients (32-bit, step 1e-3)") {
  Rng rng(55);
  Tensor xt(Shape{1, 2, 2, 2});
  Tensor gt(Shape{2});
  Tensor bt(Shape{2});
  rng.fill_uniform(xt, 0.3f, 1.2f);
  rng.fill_uniform(gt, 0.4f, 1.1f);
  rng.fill_uniform(bt, -0.5f, 0.5f);
  Var x = variable(xt, true);
  Var g = variable(gt, true);
  Var b = variable(bt, true);
  auto loss = [&]() {
    Var y = affine_modulate(x, g, b);
    return op::sum_all(op::mul(y, y));
  };
  auto gs = grad(loss(), {x, g, b});
  const float h = 1e-3f;
  auto fd_check = [&](const Var& leaf, const Var& analytic) {
    for (int64_t i = 0; i < leaf->numel(); ++i) {
      float* p = leaf->value.data();
      const float orig = p[i];
      p[i] = orig + h;
      const double fp = loss()->value.item();
      p[i] = orig - h;
      const double fm = loss()->value.item();
      p[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic->value.at(i);
      CHECK(std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1.0}) < 1e-2);
    }
  };
  fd_check(x, gs[0]);
  fd_check(g, gs[1]);
  fd_check(b, gs[2]);
}

TEST_CASE("affine: perturbing gamma[i] only touches channel i") {
  Rng rng(77);
  Tensor xt(Shape{1, 3, 4, 4});
  rng.fill_normal(xt);
  Tensor gt(Shape{3}, {1.0f, 1.0f, 1.0f});
  Tensor bt(Shape{3});
  Var base = affine_modulate(constant(xt), constant(gt), constant(bt));
  Tensor g2 = gt.clone();
  g2.data()[1] += 0.5f;
  Var bumped = affine_modulate(constant(xt), constant(g2), constant(bt));
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t s = 0; s < 16; ++s) {
      const int64_t i = c * 16 + s;
      if (c == 1)
        CHECK(bumped->value.at(i) != base->value.at(i));
      else
        CHECK(bumped->value.at(i) == base->value.at(i));
    }
}

namespace {
FusionBlock make_identity_affine_block(nn::ParamStore& ps, FusionKind kind,
                                       int64_t channels, int64_t d_e) {
  Rng rng(9);
  FusionBlock blk(ps, "f", kind, channels, d_e, d_e, rng);
  for (const auto& p : ps.params()) fill_param(p.var, 0.0f);
  // gamma == 1, beta == 0 regardless of e
  for (const auto& p : ps.params())
    if (p.name.find("gamma.fc2.b") != std::string::npos) fill_param(p.var, 1.0f);
  return blk;
}
}  // namespace

TEST_CASE("fusion_forward AFF with identity params is the identity") {
  nn::ParamStore ps;
  FusionBlock blk = make_identity_affine_block(ps, FusionKind::Aff, 2, 3);
  Tensor xt(Shape{1, 2, 2, 2}, {-1, 2, -3, 4, 5, -6, 7, -8});
  Var y = blk.forward(constant(xt), constant(Tensor(Shape{1, 3}, {1, 2, 3})), true);
  for (int64_t i = 0; i < 8; ++i) CHECK(y->value.at(i) == xt.at(i));
}

TEST_CASE("fusion_forward DF with identity affines equals ReLU") {
  nn::ParamStore ps;
  FusionBlock blk = make_identity_affine_block(ps, FusionKind::Df, 2, 3);
  Tensor xt(Shape{1, 2, 2, 2}, {-1, 2, -3, 4, 5, -6, 7, -8});
  Var y = blk.forward(constant(xt), constant(Tensor(Shape{1, 3}, {1, 2, 3})), true);
  for (int64_t i = 0; i < 8; ++i) CHECK(y->value.at(i) == std::max(0.0f, xt.at(i)));
}

TEST_CASE("fusion_forward CBN on an identical batch broadcasts beta") {
  nn::ParamStore ps;
  Rng rng(10);
  FusionBlock blk(ps, "f", FusionKind::Cbn, 2, 3, 3, rng);
  for (const auto& p : ps.params()) fill_param(p.var, 0.0f);
  fill_param(find_param(ps, "gamma.fc2.b"), 1.3f);
  fill_param(find_param(ps, "beta.fc2.b"), 0.7f);
  // two identical samples, constant per channel: batch variance is zero, so
  // the normalized input is exactly zero and only beta survives
  Tensor xt(Shape{2, 2, 1, 2}, {1, 1, 3, 3, 1, 1, 3, 3});
  Var y = blk.forward(constant(xt), constant(Tensor(Shape{2, 3}, {1, 2, 3, 1, 2, 3})), true);
  for (int64_t i = 0; i < y->numel(); ++i)
    CHECK(y->value.at(i) == doctest::Approx(0.7f).epsilon(1e-6));
}

TEST_CASE("fusion_forward CONCAT mixes text and preserves shape") {
  nn::ParamStore ps;
  Rng rng(12);
  FusionBlock blk(ps, "f", FusionKind::Concat, 4, 3, 3, rng);
  Tensor xt(Shape{2, 4, 4, 4});
  Rng xr(1);
  xr.fill_normal(xt);
  Var y1 = blk.forward(constant(xt), constant(Tensor(Shape{2, 3}, {1, 0, 0, 1, 0, 0})), true);
  Var y2 = blk.forward(constant(xt), constant(Tensor(Shape{2, 3}, {0, 0, 2, 0, 0, 2})), true);
  CHECK(y1->shape() == xt.shape());
  bool differs = false;
  for (int64_t i = 0; i < y1->numel(); ++i) differs |= y1->value.at(i) != y2->value.at(i);
  CHECK(differs);
}

TEST_CASE("batch normalization undoes per-channel affine shifts") {
  // normalize(a*x + b) == normalize(x), the property motivating affine-only
  // fusion.
  Rng rng(21);
  nn::ParamStore ps1, ps2;
  nn::BatchNorm2d bn1(ps1, "bn", 3), bn2(ps2, "bn", 3);
  Tensor xt(Shape{8, 3, 4, 4});
  rng.fill_normal(xt, 0.5f, 1.5f);
  Tensor st(Shape{8, 3, 4, 4});
  const float a[3] = {2.0f, 0.5f, -1.5f}, b[3] = {1.0f, -2.0f, 0.25f};
  for (int64_t i = 0; i < xt.numel(); ++i) {
    const int64_t c = (i / 16) % 3;
    st.data()[i] = a[c] * xt.at(i) + b[c];
  }
  Var n1 = bn1.forward(constant(xt), true);
  Var n2 = bn2.forward(constant(st), true);
  for (int64_t i = 0; i < n1->numel(); ++i) {
    const int64_t c = (i / 16) % 3;
    const float expect = a[c] < 0 ? -n1->value.at(i) : n1->value.at(i);
    CHECK(n2->value.at(i) == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("upblock doubles spatial size and zeroed convs reduce to shortcut") {
  nn::ParamStore ps;
  Rng rng(14);
  UpBlock blk(ps, "u", 4, 4, FusionKind::Df, 3, 3, rng);
  Tensor xt(Shape{1, 4, 4, 4});
  rng.fill_normal(xt);
  Var y = blk.forward(constant(xt), constant(Tensor(Shape{1, 3}, {1, 2, 3})), true);
  CHECK(y->shape() == Shape{1, 4, 8, 8});

  zero_params_matching(ps, ".conv1");
  zero_params_matching(ps, ".conv2");
  Var y2 = blk.forward(constant(xt), constant(Tensor(Shape{1, 3}, {1, 2, 3})), true);
  Var up = op::upsample_nearest2(constant(xt));
  for (int64_t i = 0; i < y2->numel(); ++i) CHECK(y2->value.at(i) == up->value.at(i));
}

TEST_CASE("upblock stays finite across random inits") {
  Tensor xt(Shape{2, 4, 4, 4});
  Rng xr(2);
  xr.fill_normal(xt);
  for (int trial = 0; trial < 100; ++trial) {
    nn::ParamStore ps;
    Rng rng(1000 + trial);
    UpBlock blk(ps, "u", 4, 6, FusionKind::Df, 3, 3, rng);
    Var y = blk.forward(constant(xt), constant(Tensor(Shape{2, 3}, {1, 2, 3, -1, 0, 2})), true);
    CHECK(y->value.all_finite());
  }
}

namespace {
GeneratorConfig small_gen_cfg(FusionKind kind) {
  GeneratorConfig cfg;
  cfg.d_e = 8;
  cfg.d_z = 6;
  cfg.base_channels = 4;
  cfg.channel_cap = 32;
  cfg.num_upblocks = 4;
  cfg.fusion = kind;
  cfg.init_seed = 77;
  return cfg;
}
}  // namespace

TEST_CASE("generate: shape, range, determinism, z-sensitivity") {
  Generator g(small_gen_cfg(FusionKind::Df));
  MESSAGE("DF generator parameters: ", g.params().num_parameters());
  CHECK(g.params().num_parameters() > 0);
  Rng rng(4);
  Tensor z = sample_noise(2, 6, rng);
  Tensor e(Shape{2, 8});
  rng.fill_normal(e);

  Tensor img = g.generate(z, e);
  CHECK(img.shape() == Shape{2, 3, 64, 64});
  for (int64_t i = 0; i < img.numel(); ++i) {
    CHECK(img.at(i) <= 1.0f);
    CHECK(img.at(i) >= -1.0f);
  }

  Generator g2(small_gen_cfg(FusionKind::Df));
  Tensor img2 = g2.generate(z, e);
  for (int64_t i = 0; i < img.numel(); ++i) CHECK(img.at(i) == img2.at(i));

  Tensor z2 = sample_noise(2, 6, rng);
  Tensor img3 = g.generate(z2, e);
  bool differs = false;
  for (int64_t i = 0; i < img.numel(); ++i) differs |= img.at(i) != img3.at(i);
  CHECK(differs);

  Tensor bad(Shape{3, 6});
  CHECK_THROWS_AS(g.generate(bad, e), InvalidInputError);
}

TEST_CASE("swapping fusion kind changes only fusion-block parameters") {
  Generator gdf(small_gen_cfg(FusionKind::Df));
  Generator gcbn(small_gen_cfg(FusionKind::Cbn));
  Generator gaff(small_gen_cfg(FusionKind::Aff));
  Generator gcat(small_gen_cfg(FusionKind::Concat));

  auto backbone = [](const Generator& g) {
    std::vector<std::pair<std::string, Shape>> out;
    for (const auto& p : g.params().params())
      if (p.name.find(".fuse") == std::string::npos)
        out.emplace_back(p.name, p.var->shape());
    return out;
  };
  auto ref = backbone(gdf);
  CHECK(backbone(gcbn) == ref);
  CHECK(backbone(gaff) == ref);
  CHECK(backbone(gcat) == ref);
}
