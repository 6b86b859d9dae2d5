#include <doctest.h>

#include "oracles.hpp"
#include "uda/align/pc.hpp"

using namespace uda;
using nn::Tensor;
using nn::Var;

namespace {

std::array<Var, kScaleCount> as_vars(const std::array<Tensor, kScaleCount>& t) {
  return {nn::constant(t[0]), nn::constant(t[1]), nn::constant(t[2])};
}

std::array<Tensor, kScaleCount> random_scales(std::mt19937_64& rng) {
  return {oracles::random_tensor({2, 4, 4}, rng), oracles::random_tensor({3, 2, 2}, rng),
          oracles::random_tensor({4, 1, 1}, rng)};
}

double pc_value(const std::array<Tensor, kScaleCount>& a,
                const std::array<Tensor, kScaleCount>& b, bool normalize = false) {
  nn::NoGradGuard g;
  return pc_loss(as_vars(a), as_vars(b), normalize)->value[0];
}

}  // namespace

TEST_CASE("pc weights are (4,2,1) finest to coarsest") {
  CHECK(kPcWeights[0] == 4.0);
  CHECK(kPcWeights[1] == 2.0);
  CHECK(kPcWeights[2] == 1.0);
}

TEST_CASE("pc_loss: identical inputs, hand value, homogeneity") {
  std::mt19937_64 rng(31);
  const auto a = random_scales(rng);
  CHECK(pc_value(a, a) == 0.0);

  // one element per scale with |difference| 1: 1/4 + 1/2 + 1 = 1.75
  std::array<Tensor, kScaleCount> x = {Tensor::full({1, 1, 1}, 2.0), Tensor::full({1, 1, 1}, 5.0),
                                       Tensor::full({1, 1, 1}, -1.0)};
  std::array<Tensor, kScaleCount> y = {Tensor::full({1, 1, 1}, 3.0), Tensor::full({1, 1, 1}, 4.0),
                                       Tensor::full({1, 1, 1}, 0.0)};
  CHECK(pc_value(x, y) == doctest::Approx(1.75).epsilon(1e-12));

  auto b = random_scales(rng);
  const double base = pc_value(a, b);
  std::array<Tensor, kScaleCount> a2 = a, b2 = b;
  for (int s = 0; s < kScaleCount; ++s) {
    for (std::int64_t i = 0; i < a2[s].size(); ++i) a2[s][i] *= 2.0;
    for (std::int64_t i = 0; i < b2[s].size(); ++i) b2[s][i] *= 2.0;
  }
  CHECK(pc_value(a2, b2) == doctest::Approx(2.0 * base).epsilon(1e-9));
}

TEST_CASE("pc_loss: symmetry, nonnegativity, triangle inequality") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_scales(rng), b = random_scales(rng), c = random_scales(rng);
    const double ab = pc_value(a, b), ba = pc_value(b, a);
    CHECK(ab == doctest::Approx(ba));
    CHECK(ab >= 0.0);
    CHECK(pc_value(a, c) <= pc_value(a, b) + pc_value(b, c) + 1e-9);
  }
}

TEST_CASE("pc_loss gradient is +-1/w_i away from ties") {
  std::mt19937_64 rng(33);
  const auto a = random_scales(rng), b = random_scales(rng);
  std::array<Var, kScaleCount> av, bv;
  for (int s = 0; s < kScaleCount; ++s) {
    av[s] = nn::parameter(a[s]);
    bv[s] = nn::constant(b[s]);
  }
  nn::backward(pc_loss(av, bv));
  for (int s = 0; s < kScaleCount; ++s) {
    for (std::int64_t i = 0; i < av[s]->grad.size(); ++i) {
      const double expect = (a[s][i] > b[s][i] ? 1.0 : -1.0) / kPcWeights[s];
      CHECK(av[s]->grad[i] == doctest::Approx(expect));
    }
    // finite differences on one entry per scale
    auto f = [&](const Tensor& probe) {
      std::array<Tensor, kScaleCount> mod = a;
      mod[s] = probe;
      return pc_value(mod, b);
    };
    const Tensor fd = oracles::finite_diff(f, a[s], 1e-6);
    for (std::int64_t i = 0; i < fd.size(); ++i)
      CHECK(oracles::rel_err(av[s]->grad[i], fd[i]) < 1e-4);
  }
}

TEST_CASE("pc_loss shape mismatch raises") {
  std::mt19937_64 rng(34);
  auto a = random_scales(rng);
  auto b = a;
  b[1] = Tensor({3, 2, 3});
  CHECK_THROWS_AS(pc_value(a, b), std::invalid_argument);
}

TEST_CASE("pc_normalize switches to per-element mean") {
  std::array<Tensor, kScaleCount> x = {Tensor::full({2, 2, 2}, 1.0), Tensor::full({1, 1, 1}, 1.0),
                                       Tensor::full({1, 1, 1}, 1.0)};
  std::array<Tensor, kScaleCount> y = {Tensor::full({2, 2, 2}, 0.0), Tensor::full({1, 1, 1}, 0.0),
                                       Tensor::full({1, 1, 1}, 0.0)};
  CHECK(pc_value(x, y, false) == doctest::Approx(8.0 / 4 + 1.0 / 2 + 1.0));
  CHECK(pc_value(x, y, true) == doctest::Approx(1.0 / 4 + 1.0 / 2 + 1.0));
}
