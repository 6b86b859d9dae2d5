#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "uda/core/distance.hpp"
#include "uda/core/feature_map.hpp"
#include "uda/core/geometry.hpp"

using namespace uda;

namespace {

Box make_box(double cx, double cy, double w, double h) { return Box{cx, cy, w, h}; }

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Box b;
  b.w = 0.05 + 0.4 * u(rng);
  b.h = 0.05 + 0.4 * u(rng);
  b.cx = b.w / 2 + (1.0 - b.w) * u(rng);
  b.cy = b.h / 2 + (1.0 - b.h) * u(rng);
  return b;
}

}  // namespace

TEST_CASE("iou: identity, disjoint, hand geometry") {
  const Box a = make_box(0.5, 0.5, 0.2, 0.2);
  CHECK(iou(a, a) == doctest::Approx(1.0));

  CHECK(iou(make_box(0.2, 0.2, 0.1, 0.1), make_box(0.8, 0.8, 0.1, 0.1)) == 0.0);

  // Shifted by half a width: intersection 0.1x0.2, union 0.06.
  const Box b = make_box(0.6, 0.5, 0.2, 0.2);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("iou is symmetric and 1 on self for random boxes") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    REQUIRE(a.valid());
    CHECK(iou(a, b) == doctest::Approx(iou(b, a)));
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("flatten: ordering and round trip") {
  FeatureMap one = unflatten({7.0}, 1, 1, 1);
  CHECK(flatten(one) == std::vector<double>{7.0});

  // channels [[1,2]] and [[3,4]] in (channel, row, column) order
  FeatureMap two = unflatten({1, 2, 3, 4}, 2, 1, 2);
  CHECK(flatten(two) == std::vector<double>({1, 2, 3, 4}));

  std::mt19937_64 rng(12);
  auto t = oracles::random_tensor({4, 3, 3}, rng);
  FeatureMap f;
  f.data = t;
  const auto v = flatten(f);
  const FeatureMap g = unflatten(v, 4, 3, 3);
  for (std::int64_t i = 0; i < t.size(); ++i) CHECK(g.data[i] == t[i]);
}

TEST_CASE("cosine_distance: examples and edge rules") {
  const std::vector<double> v123 = {1, 2, 3};
  CHECK(cosine_distance(v123, v123) == doctest::Approx(0.0));

  const std::vector<double> e1 = {1, 0}, e2 = {0, 1};
  CHECK(cosine_distance(e1, e2) == doctest::Approx(1.0));

  const std::vector<double> u = {1, 1}, w = {1, 0};
  CHECK(cosine_distance(u, w) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-9));

  const std::vector<double> zero = {0, 0};
  CHECK(cosine_distance(zero, e1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_distance(zero, zero), std::domain_error);
}

TEST_CASE("cosine_distance symmetry on random vectors") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> u(5), v(5);
    for (auto& x : u) x = uni(rng);
    for (auto& x : v) x = uni(rng);
    CHECK(cosine_distance(u, v) == doctest::Approx(cosine_distance(v, u)));
    CHECK(cosine_distance(u, u) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("ScaleSet validation enforces ordering") {
  ScaleSet s;
  s.maps[0] = {nn::Tensor({2, 8, 8}), ScaleTag::Large};
  s.maps[1] = {nn::Tensor({2, 4, 4}), ScaleTag::Medium};
  s.maps[2] = {nn::Tensor({2, 2, 2}), ScaleTag::Small};
  CHECK_NOTHROW(s.validate());

  std::swap(s.maps[0].data, s.maps[2].data);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
