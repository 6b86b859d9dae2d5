#include <doctest.h>

#include "oracles.hpp"
#include "uda/align/global.hpp"

using namespace uda;
using nn::Tensor;
using nn::Var;

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

TEST_CASE("adv_loss: confident, balanced, symmetric at p=0.5") {
  // confident correct: d=1, logit 30
  Var high = nn::constant(Tensor::scalar(30.0));
  CHECK(adv_loss(high, 1)->value[0] < 1e-7);

  // d=0 at p=0.5 equals -log(0.5)
  Var zero = nn::constant(Tensor::scalar(0.0));
  CHECK(adv_loss(zero, 0)->value[0] == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(adv_loss(zero, 1)->value[0] == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("adv_loss is nonnegative across logits and labels") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int i = 0; i < 200; ++i) {
    const double logit = u(rng);
    for (int d : {0, 1}) CHECK(adv_loss(nn::constant(Tensor::scalar(logit)), d)->value[0] >= 0.0);
  }
}

TEST_CASE("img_loss: constant-logit discriminator gives 2 ln 2") {
  // A zero-weight discriminator emits logit 0 for any input.
  ConvDiscriminator disc(2, 7);
  for (auto& p : disc.parameters())
    for (std::int64_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.0;

  std::mt19937_64 rng(42);
  Var fs = nn::constant(oracles::random_tensor({2, 8, 8}, rng));
  Var ft = nn::constant(oracles::random_tensor({2, 8, 8}, rng));
  AlignCounters counters;
  Var loss = img_loss(fs, ft, disc, 1.0, &counters);
  CHECK(loss->value[0] == doctest::Approx(2.0 * kLn2).epsilon(1e-12));
  CHECK(counters.grl_calls == 2);
  CHECK(counters.disc_global_calls == 2);
}

TEST_CASE("img_loss: near-perfect discriminator scores near zero") {
  // Bypass the conv stack: bias the final linear layer is not enough to
  // separate domains, so check adv_loss directly at +-30 logits instead.
  CHECK(adv_loss(nn::constant(Tensor::scalar(-30.0)), 0)->value[0] < 1e-7);
  CHECK(adv_loss(nn::constant(Tensor::scalar(30.0)), 1)->value[0] < 1e-7);
}

TEST_CASE("img_loss shape mismatch raises; symmetric under domain swap") {
  ConvDiscriminator disc(2, 7);
  std::mt19937_64 rng(43);
  Var fs = nn::constant(oracles::random_tensor({2, 8, 8}, rng));
  Var ft = nn::constant(oracles::random_tensor({2, 8, 8}, rng));
  Var bad = nn::constant(oracles::random_tensor({2, 8, 7}, rng));
  CHECK_THROWS_AS(img_loss(fs, bad, disc, 1.0), std::invalid_argument);

  // adv(s,0)+adv(t,1) under swap equals adv(t,0)+adv(s,1) with labels swapped
  const double a = img_loss(fs, ft, disc, 1.0)->value[0];
  Var ls = disc.logits(fs), lt = disc.logits(ft);
  const double swapped =
      adv_loss(lt, 0)->value[0] + adv_loss(ls, 1)->value[0];
  const double direct =
      adv_loss(ls, 0)->value[0] + adv_loss(lt, 1)->value[0];
  CHECK(a == doctest::Approx(direct).epsilon(1e-12));
  // swapping inputs and labels together reproduces the same total
  Var swapped_loss = img_loss(ft, fs, disc, 1.0);
  CHECK(swapped_loss->value[0] == doctest::Approx(swapped).epsilon(1e-9));
}

TEST_CASE("grl flips the sign of feature gradients through img_loss") {
  ConvDiscriminator disc(2, 9);
  std::mt19937_64 rng(44);
  Tensor f = oracles::random_tensor({2, 8, 8}, rng);
  Tensor g = oracles::random_tensor({2, 8, 8}, rng);

  auto grad_with_lambda = [&](bool reversed) {
    Var fs = nn::parameter(f);
    Var ft = nn::constant(g);
    Var loss;
    if (reversed) {
      loss = img_loss(fs, ft, disc, 1.0);
    } else {
      loss = nn::add(adv_loss(disc.logits(fs), 0), adv_loss(disc.logits(ft), 1));
    }
    nn::backward(loss);
    return fs->grad;
  };
  const Tensor with_grl = grad_with_lambda(true);
  const Tensor without = grad_with_lambda(false);
  for (std::int64_t i = 0; i < with_grl.size(); ++i)
    CHECK(with_grl[i] == doctest::Approx(-without[i]).epsilon(1e-9));
}

TEST_CASE("adv_loss composed with grl matches -lambda times finite differences") {
  ConvDiscriminator disc(1, 10);
  std::mt19937_64 rng(45);
  const double lambda = 0.8;
  Tensor f = oracles::random_tensor({1, 6, 6}, rng);

  Var leaf = nn::parameter(f);
  nn::backward(adv_loss(disc.logits(nn::grl(leaf, lambda)), 1));

  auto fd = oracles::finite_diff(
      [&](const Tensor& t) {
        nn::NoGradGuard guard;
        return adv_loss(disc.logits(nn::grl(nn::constant(t), lambda)), 1)->value[0];
      },
      f, 1e-3);
  for (std::int64_t i = 0; i < fd.size(); ++i)
    if (std::abs(fd[i]) > 1e-6)
      CHECK(oracles::rel_err(leaf->grad[i], -lambda * fd[i]) < 1e-2);
}
