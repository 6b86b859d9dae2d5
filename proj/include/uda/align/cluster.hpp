#pragma once

#include <vector>

namespace uda {

/// Flat clustering produced by bottom-up agglomeration.
struct ClusterLabels {
  std::vector<int> labels;  // group id per input point, ids dense in [0, count)
  int count = 0;
};

/// Complete-linkage agglomeration under cosine distance. Merging continues
/// while the smallest pairwise complete-linkage distance is <= threshold.
/// Ties pick the lexicographically first active pair.
ClusterLabels agglomerate_threshold(const std::vector<std::vector<double>>& points,
                                    double threshold);

/// Same procedure, but merging continues until exactly `groups` clusters
/// remain. Throws std::invalid_argument when points.size() < groups.
ClusterLabels agglomerate_count(const std::vector<std::vector<double>>& points, int groups);

}  // namespace uda
