#include "uda/align/cluster.hpp"

#include <limits>
#include <stdexcept>

#include "uda/core/distance.hpp"

namespace uda {

namespace {

// Complete-linkage agglomeration on a precomputed distance matrix, using the
// Lance-Williams update d(k, i∪j) = max(d(k,i), d(k,j)). Stops when either
// `groups` clusters remain (count mode) or the closest pair is farther than
// `threshold` (threshold mode, groups < 0).
ClusterLabels agglomerate(const std::vector<std::vector<double>>& points, double threshold,
                          int groups) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw std::invalid_argument("agglomerate: no points");
  if (groups >= 0 && n < groups)
    throw std::invalid_argument("agglomerate: fewer points than requested groups");

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = cosine_distance(points[i], points[j]);

  std::vector<int> owner(n);  // active-cluster slot per point
  std::vector<bool> active(n, true);
  for (int i = 0; i < n; ++i) owner[i] = i;
  int active_count = n;

  while (active_count > std::max(groups, 1)) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    if (groups < 0 && best > threshold) break;
    // Merge bj into bi.
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double d = std::max(dist[bi][k], dist[bj][k]);
      dist[bi][k] = dist[k][bi] = d;
    }
    active[bj] = false;
    for (int p = 0; p < n; ++p)
      if (owner[p] == bj) owner[p] = bi;
    --active_count;
  }

  // Relabel to dense ids in slot order.
  ClusterLabels out;
  out.labels.assign(n, -1);
  std::vector<int> slot_to_id(n, -1);
  for (int p = 0; p < n; ++p) {
    int& id = slot_to_id[owner[p]];
    if (id < 0) id = out.count++;
    out.labels[p] = id;
  }
  return out;
}

}  // namespace

ClusterLabels agglomerate_threshold(const std::vector<std::vector<double>>& points,
                                    double threshold) {
  return agglomerate(points, threshold, -1);
}

ClusterLabels agglomerate_count(const std::vector<std::vector<double>>& points, int groups) {
  if (groups < 1) throw std::invalid_argument("agglomerate: groups must be >= 1");
  return agglomerate(points, 0.0, groups);
}

}  // namespace uda
