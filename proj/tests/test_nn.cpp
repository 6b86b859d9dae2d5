#include <doctest.h>

#include "oracles.hpp"
#include "uda/nn/ops.hpp"
#include "uda/nn/optim.hpp"

using namespace uda;
using nn::Tensor;
using nn::Var;

namespace {

// Checks d(sum of weighted output)/dx against finite differences for an op
// that maps one tensor to one tensor. A fixed random cotangent exercises all
// output entries at once.
void check_grad(const std::function<Var(const Var&)>& op, const Tensor& x, double tol = 1e-6,
                std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  Var leaf = nn::parameter(x);
  Var out = op(leaf);
  Tensor cotangent = oracles::random_tensor(out->value.shape(), rng);
  Var loss = nn::weighted_sum(out, cotangent);
  nn::backward(loss);

  auto f = [&](const Tensor& probe) {
    nn::NoGradGuard g;
    Var v = op(nn::constant(probe));
    double acc = 0;
    for (std::int64_t i = 0; i < v->value.size(); ++i) acc += v->value[i] * cotangent[i];
    return acc;
  };
  Tensor fd = oracles::finite_diff(f, x, 1e-5);
  REQUIRE(leaf->grad.size() == fd.size());
  for (std::int64_t i = 0; i < fd.size(); ++i)
    CHECK(oracles::rel_err(leaf->grad[i], fd[i], 1e-5) < tol);
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
  std::mt19937_64 rng(1);
  Tensor x = oracles::random_tensor({3, 4}, rng, -2.0, 2.0);
  check_grad([](const Var& v) { return nn::scale(nn::add_scalar(v, 0.3), -1.7); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::square(v); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::sigmoid(v); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::leaky_relu(v, 0.1); }, x, 1e-4);
  check_grad([](const Var& v) { return nn::rsub_scalar(1.0, v); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::abs_val(v); }, x, 1e-4);
  check_grad([](const Var& v) { return nn::mul(v, nn::sigmoid(v)); }, x, 1e-5);
  Tensor pos = oracles::random_tensor({8}, rng, 0.2, 3.0);
  check_grad([](const Var& v) { return nn::log_val(v); }, pos, 1e-5);
  check_grad([](const Var& v) { return nn::clamp_min(v, 1.0); }, pos, 1e-4);
}

TEST_CASE("reduction and shape op gradients") {
  std::mt19937_64 rng(2);
  Tensor x = oracles::random_tensor({2, 3, 4}, rng);
  check_grad([](const Var& v) { return nn::mean(v); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::reshape(v, {4, 6}); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::gather_channels(v, {1, 0, 1}); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::mean_over_channels(v); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::gap_spatial(v); }, x, 1e-5);

  Tensor x4 = oracles::random_tensor({2, 2, 3, 3}, rng);
  check_grad([](const Var& v) { return nn::select_item(v, 1); }, x4, 1e-5);
  check_grad([](const Var& v) { return nn::upsample2x(v); }, x4, 1e-5);
}

TEST_CASE("conv2d matches finite differences for input, weight, and bias") {
  std::mt19937_64 rng(3);
  Tensor x = oracles::random_tensor({2, 3, 6, 6}, rng);
  Tensor w = oracles::random_tensor({4, 3, 3, 3}, rng);
  Tensor b = oracles::random_tensor({4}, rng);
  Tensor cot = oracles::random_tensor({2, 4, 3, 3}, rng);

  Var xv = nn::parameter(x), wv = nn::parameter(w), bv = nn::parameter(b);
  Var out = nn::conv2d(xv, wv, bv, 2, 1);
  REQUIRE(out->value.shape() == std::vector<int>({2, 4, 3, 3}));
  nn::backward(nn::weighted_sum(out, cot));

  auto run = [&](const Tensor& xx, const Tensor& ww, const Tensor& bb) {
    nn::NoGradGuard g;
    Var o = nn::conv2d(nn::constant(xx), nn::constant(ww), nn::constant(bb), 2, 1);
    double acc = 0;
    for (std::int64_t i = 0; i < o->value.size(); ++i) acc += o->value[i] * cot[i];
    return acc;
  };
  Tensor fx = oracles::finite_diff([&](const Tensor& t) { return run(t, w, b); }, x, 1e-5);
  Tensor fw = oracles::finite_diff([&](const Tensor& t) { return run(x, t, b); }, w, 1e-5);
  Tensor fb = oracles::finite_diff([&](const Tensor& t) { return run(x, w, t); }, b, 1e-5);
  for (std::int64_t i = 0; i < fx.size(); ++i)
    CHECK(oracles::rel_err(xv->grad[i], fx[i], 1e-5) < 1e-5);
  for (std::int64_t i = 0; i < fw.size(); ++i)
    CHECK(oracles::rel_err(wv->grad[i], fw[i], 1e-5) < 1e-5);
  for (std::int64_t i = 0; i < fb.size(); ++i)
    CHECK(oracles::rel_err(bv->grad[i], fb[i], 1e-5) < 1e-5);
}

TEST_CASE("conv1d, linear, and normalization gradients") {
  std::mt19937_64 rng(4);
  Tensor x = oracles::random_tensor({7}, rng);
  Tensor k = oracles::random_tensor({3}, rng);
  Tensor b = oracles::random_tensor({1}, rng);
  check_grad([&](const Var& v) { return nn::conv1d_same(v, nn::constant(k), nn::constant(b)); },
             x, 1e-5);
  check_grad([&](const Var& v) { return nn::conv1d_same(nn::constant(x), v, nn::constant(b)); },
             k, 1e-5);

  Tensor w = oracles::random_tensor({2, 7}, rng);
  Tensor lb = oracles::random_tensor({2}, rng);
  check_grad([&](const Var& v) { return nn::linear(v, nn::constant(w), nn::constant(lb)); }, x,
             1e-5);
  Tensor batch = oracles::random_tensor({3, 7}, rng);
  check_grad([&](const Var& v) { return nn::linear(v, nn::constant(w), nn::constant(lb)); },
             batch, 1e-5);
  check_grad(
      [&](const Var& v) { return nn::linear(nn::constant(batch), v, nn::constant(lb)); }, w,
      1e-5);

  check_grad([](const Var& v) { return nn::l2_normalize(v); }, x, 1e-4);
}

TEST_CASE("mul_cvec, stack, mean_items, ptap gradients") {
  std::mt19937_64 rng(5);
  Tensor x = oracles::random_tensor({4, 3, 3}, rng);
  Tensor w = oracles::random_tensor({4}, rng, 0.1, 0.9);
  check_grad([&](const Var& v) { return nn::mul_cvec(v, nn::constant(w)); }, x, 1e-5);
  check_grad([&](const Var& v) { return nn::mul_cvec(nn::constant(x), v); }, w, 1e-5);
  check_grad([&](const Var& v) { return nn::ptap(v, nn::constant(w), 2); }, x, 1e-4);
  check_grad([&](const Var& v) { return nn::ptap(nn::constant(x), v, 2); }, w, 1e-4);

  check_grad([](const Var& v) { return nn::stack_items({nn::scale(v, 2.0), v}); }, x, 1e-5);
  check_grad([](const Var& v) { return nn::mean_items({v, nn::scale(v, -3.0)}); }, x, 1e-5);
}

TEST_CASE("region_pool: constant field, P=1 mean oracle, gradients") {
  // Constant map pools to the constant everywhere.
  Tensor c = Tensor::full({1, 2, 5, 5}, 3.0);
  Var pooled = nn::region_pool(nn::constant(c), 0, 0.0, 0.0, 5.0, 5.0, 3);
  for (std::int64_t i = 0; i < pooled->value.size(); ++i)
    CHECK(pooled->value[i] == doctest::Approx(3.0));

  // P=1 equals the area-weighted mean over covered cells, computed here by
  // brute force over every cell of the map.
  std::mt19937_64 rng(6);
  Tensor x = oracles::random_tensor({1, 1, 6, 6}, rng);
  const double x0 = 1.3, y0 = 0.7, x1 = 4.9, y1 = 5.2;
  double acc = 0, area = 0;
  for (int cy = 0; cy < 6; ++cy)
    for (int cx = 0; cx < 6; ++cx) {
      const double ox = std::max(0.0, std::min<double>(cx + 1, x1) - std::max<double>(cx, x0));
      const double oy = std::max(0.0, std::min<double>(cy + 1, y1) - std::max<double>(cy, y0));
      acc += ox * oy * x[cy * 6 + cx];
      area += ox * oy;
    }
  const double expected = acc / area;
  Var p1 = nn::region_pool(nn::constant(x), 0, x0, y0, x1, y1, 1);
  CHECK(p1->value[0] == doctest::Approx(expected).epsilon(1e-9));

  check_grad(
      [&](const Var& v) { return nn::region_pool(v, 0, x0, y0, x1, y1, 2); }, x, 1e-5);
}

TEST_CASE("grl: identity forward, reversed scaled backward") {
  Tensor x = Tensor::full({3}, 2.0);
  Var leaf = nn::parameter(x);
  Var out = nn::grl(leaf, 1.0);
  for (std::int64_t i = 0; i < out->value.size(); ++i) CHECK(out->value[i] == 2.0);

  // downstream gradient 2.0 -> upstream -2.0
  Var loss = nn::weighted_sum(out, Tensor::full({3}, 2.0));
  nn::backward(loss);
  for (std::int64_t i = 0; i < 3; ++i) CHECK(leaf->grad[i] == doctest::Approx(-2.0));

  // d/dx of (grl(x, 0.5) * 3): the composed forward is 3x (finite differences
  // give 3), while the reported gradient must be -0.5 * 3.
  Var leaf2 = nn::parameter(Tensor::full({1}, 1.25));
  Var comp = nn::scale(nn::grl(leaf2, 0.5), 3.0);
  nn::backward(nn::sum(comp));
  auto fd = oracles::finite_diff(
      [](const Tensor& t) {
        nn::NoGradGuard g;
        return nn::scale(nn::grl(nn::constant(t), 0.5), 3.0)->value[0];
      },
      Tensor::full({1}, 1.25));
  CHECK(fd[0] == doctest::Approx(3.0));
  CHECK(leaf2->grad[0] == doctest::Approx(-0.5 * fd[0]));
}

TEST_CASE("bce_with_logits and masked smooth-L1 gradients") {
  std::mt19937_64 rng(8);
  Tensor x = oracles::random_tensor({3, 3}, rng, -3.0, 3.0);
  Tensor t({3, 3});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = (i % 2 == 0) ? 1.0 : 0.0;
  check_grad([&](const Var& v) { return nn::bce_with_logits_sum(v, t); }, x, 1e-5);

  Tensor target = oracles::random_tensor({3, 3}, rng);
  Tensor mask({3, 3});
  for (std::int64_t i = 0; i < mask.size(); ++i) mask[i] = (i % 3 == 0) ? 1.0 : 0.0;
  check_grad([&](const Var& v) { return nn::masked_smooth_l1_sum(v, target, mask, 1.0); }, x,
             1e-4);
}

TEST_CASE("sgd momentum descends a quadratic") {
  Var p = nn::parameter(Tensor::full({2}, 4.0));
  nn::SgdMomentum opt({p}, 0.9, 0.0);
  for (int i = 0; i < 300; ++i) {
    Var loss = nn::sum(nn::square(p));
    nn::backward(loss);
    opt.step(0.02);
    opt.zero_grad();
  }
  CHECK(std::abs(p->value[0]) < 1e-3);
  CHECK(std::abs(p->value[1]) < 1e-3);
}

TEST_CASE("gradient clipping bounds the global norm") {
  Var p = nn::parameter(Tensor::full({4}, 100.0));
  nn::SgdMomentum opt({p}, 0.0, 1.0);
  Var loss = nn::sum(nn::square(p));  // gradient 200 per entry
  nn::backward(loss);
  opt.step(1.0);
  // clipped gradient has global norm 1, so each entry moves by 1/2
  CHECK(p->value[0] == doctest::Approx(100.0 - 0.5));
}
