// Independent reference implementations used as test oracles. These must not
// share code paths with the implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "uda/core/distance.hpp"
#include "uda/nn/tensor.hpp"

namespace oracles {

/// Central finite differences of a scalar function of a tensor.
inline uda::nn::Tensor finite_diff(const std::function<double(const uda::nn::Tensor&)>& f,
                                   uda::nn::Tensor x, double step = 1e-3) {
  uda::nn::Tensor g(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double hi = f(x);
    x[i] = saved - step;
    const double lo = f(x);
    x[i] = saved;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Exhaustive complete-linkage agglomeration: at every round all inter-cluster
/// distances are recomputed from the raw members (no cached linkage updates).
/// stop_groups < 0 means threshold mode.
inline std::vector<int> brute_force_agglomerate(const std::vector<std::vector<double>>& points,
                                                double threshold, int stop_groups) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) clusters.push_back({i});

  auto linkage = [&](const std::vector<int>& a, const std::vector<int>& b) {
    double worst = 0;
    for (int i : a)
      for (int j : b)
        worst = std::max(worst, uda::cosine_distance(points[static_cast<std::size_t>(i)],
                                                     points[static_cast<std::size_t>(j)]));
    return worst;
  };

  while (static_cast<int>(clusters.size()) > std::max(stop_groups, 1)) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = linkage(clusters[i], clusters[j]);
        if (d < best) {
          best = d;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }
    if (stop_groups < 0 && best > threshold) break;
    clusters[static_cast<std::size_t>(bi)].insert(clusters[static_cast<std::size_t>(bi)].end(),
                                                  clusters[static_cast<std::size_t>(bj)].begin(),
                                                  clusters[static_cast<std::size_t>(bj)].end());
    clusters.erase(clusters.begin() + bj);
  }

  // Labels in order of each point's first appearance, mirroring the dense
  // relabeling of the implementation.
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int p = 0; p < n; ++p) {
    if (labels[static_cast<std::size_t>(p)] >= 0) continue;
    for (const auto& c : clusters) {
      if (std::find(c.begin(), c.end(), p) == c.end()) continue;
      for (int m : c) labels[static_cast<std::size_t>(m)] = next;
      ++next;
      break;
    }
  }
  return labels;
}

inline uda::nn::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  uda::nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace oracles
