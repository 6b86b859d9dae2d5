#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "uda/align/cluster.hpp"

using namespace uda;

namespace {

std::vector<std::vector<double>> random_points(std::mt19937_64& rng, int n, int dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& p : pts)
    for (auto& x : p) x = u(rng);
  return pts;
}

}  // namespace

TEST_CASE("threshold agglomeration: single point and collinear pair") {
  const ClusterLabels one = agglomerate_threshold({{1.0, 2.0}}, 0.1);
  CHECK(one.count == 1);
  CHECK(one.labels == std::vector<int>{0});

  // parallel vectors have cosine distance 0 <= 0.1
  const ClusterLabels two = agglomerate_threshold({{1.0, 2.0}, {2.0, 4.0}}, 0.1);
  CHECK(two.count == 1);
  CHECK(two.labels == std::vector<int>({0, 0}));
}

TEST_CASE("threshold agglomeration matches the exhaustive oracle") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size_dist(2, 8);
  std::uniform_int_distribution<int> dim_dist(2, 5);
  const double thresholds[] = {0.05, 0.1, 0.3, 0.8};
  for (int trial = 0; trial < 300; ++trial) {
    const auto pts = random_points(rng, size_dist(rng), dim_dist(rng));
    const double thr = thresholds[trial % 4];
    const ClusterLabels got = agglomerate_threshold(pts, thr);
    const auto expected = oracles::brute_force_agglomerate(pts, thr, -1);
    CHECK(got.labels == expected);
  }
}

TEST_CASE("count agglomeration matches the exhaustive oracle") {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> size_dist(2, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = size_dist(rng);
    std::uniform_int_distribution<int> group_dist(1, n);
    const int groups = group_dist(rng);
    const auto pts = random_points(rng, n, 3);
    const ClusterLabels got = agglomerate_count(pts, groups);
    CHECK(got.count == groups);
    CHECK(got.labels == oracles::brute_force_agglomerate(pts, 0.0, groups));
  }
}

TEST_CASE("count agglomeration rejects more groups than points") {
  std::mt19937_64 rng(23);
  const auto pts = random_points(rng, 2, 3);
  CHECK_THROWS_AS(agglomerate_count(pts, 3), std::invalid_argument);
}

TEST_CASE("all-zero points propagate the degenerate-embedding error") {
  const std::vector<std::vector<double>> zeros = {{0, 0}, {0, 0}};
  CHECK_THROWS_AS(agglomerate_threshold(zeros, 0.1), std::domain_error);
}
