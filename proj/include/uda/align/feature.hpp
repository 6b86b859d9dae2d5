#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "uda/align/discriminator.hpp"
#include "uda/align/instance.hpp"
#include "uda/nn/ops.hpp"

namespace uda {

/// Partition of a feature map's channels with differentiable group-mean maps.
struct ChannelGrouping {
  std::vector<int> labels;           // group id per channel
  std::vector<nn::Var> group_maps;   // per group, [1,H,W]
  std::vector<double> inertia_trace; // per-iteration inertia (k-means only)
};

/// Complete-linkage cosine agglomeration of channels down to exactly `groups`
/// clusters. Throws when the map has fewer channels than groups.
ChannelGrouping channel_cluster_hierarchical(const nn::Var& fmap, int groups,
                                             AlignCounters* counters = nullptr);

/// Lloyd's algorithm on flattened channels under Euclidean distance, with
/// deterministic farthest-point initialization. A cluster that loses all
/// members keeps its previous centroid as its map.
ChannelGrouping channel_cluster_kmeans(const nn::Var& fmap, int k, int max_iter,
                                       std::uint64_t seed, AlignCounters* counters = nullptr);

/// Pixel-wise top-k attention pooling to a single-channel map,
/// k = ceil(keep_fraction * C).
nn::Var ptap_pool(const nn::Var& fmap, const ChannelRanking& ranking, double keep_fraction,
                  AlignCounters* counters = nullptr);

/// Mean adversarial loss over per-scale pooled maps from both domains, summed
/// across scales. Empty per-scale inputs contribute zero (counted).
nn::Var feature_adv_loss(const std::array<std::vector<nn::Var>, kScaleCount>& src_maps,
                         const std::array<std::vector<nn::Var>, kScaleCount>& tgt_maps,
                         const std::array<const ConvDiscriminator*, kScaleCount>& discs,
                         double lambda, AlignCounters* counters = nullptr);

}  // namespace uda
