#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "uda/align/cluster.hpp"
#include "uda/align/discriminator.hpp"
#include "uda/align/global.hpp"
#include "uda/detector/codec.hpp"
#include "uda/nn/ops.hpp"

namespace uda {

/// Pooled per-detection feature crop.
struct InstanceCrop {
  nn::Var features;     // [C, P, P]
  int detection_index;  // index into the source DetectionSet
  int scale;            // ScaleTag index the crop was pooled from
};

struct ExtractResult {
  std::vector<InstanceCrop> crops;
  int dropped = 0;  // detections whose box degenerated on the feature grid
};

/// Pools each detection's box region from its size-assigned scale map into a
/// fixed PxP grid. `features` are batched [N,C,H,W] vars; `item` selects the
/// batch element the detections belong to.
ExtractResult extract_instances(const std::array<nn::Var, kScaleCount>& features, int item,
                                const DetectionSet& detections, int pool_size,
                                const DetectorConfig& cfg);

/// Channel ranking from attention: sigmoid of a same-padded 1-D convolution
/// over per-channel spatial means.
struct ChannelRanking {
  nn::Var weights;         // [C], entries in (0,1)
  std::vector<int> order;  // channels sorted by weight descending (ties: lower index)
};

/// Learned channel attention (one shared 1-D kernel plus bias).
class ChannelAttention {
 public:
  ChannelAttention(int kernel_size, std::uint64_t seed);

  /// x: [C,H,W] (any spatial size, any channel count).
  ChannelRanking rank(const nn::Var& x) const;

  std::vector<nn::Var> parameters() const { return {kernel_, bias_}; }
  void collect_parameters(const std::string& prefix,
                          std::map<std::string, nn::Var>& out) const;

 private:
  nn::Var kernel_, bias_;
};

/// Scales channels by their attention weights and keeps the top
/// ceil(keep_fraction * C) of them in rank order.
nn::Var sff_filter(const nn::Var& crop, const ChannelRanking& ranking, double keep_fraction);

/// Flattened, L2-normalized embedding of a crop.
nn::Var instance_embedding(const nn::Var& crop);

/// Clusters with differentiable group means over the member embeddings.
struct ClusterAssignment {
  std::vector<int> labels;
  std::vector<nn::Var> representatives;
};

/// Complete-linkage cosine agglomeration over embeddings; merging stops when
/// the closest pair is farther than merge_threshold.
ClusterAssignment agglomerative_cluster(const std::vector<nn::Var>& embeddings,
                                        double merge_threshold,
                                        AlignCounters* counters = nullptr);

/// Index of the Euclidean-nearest target embedding (ties: lowest index).
int nearest_neighbor(const nn::Var& src, const std::vector<nn::Var>& targets);

/// Max-margin contrastive loss: every source embedding is pulled toward its
/// nearest target and pushed from all other targets closer than the margin
/// (squared Euclidean distances throughout).
nn::Var contrastive_loss(const std::vector<nn::Var>& src, const std::vector<nn::Var>& tgt,
                         double margin, AlignCounters* counters = nullptr);

/// Mean adversarial loss over gradient-reversed representatives of each
/// domain. A domain with no representatives contributes zero (counted).
nn::Var instance_adv_loss(const std::vector<nn::Var>& src_reps,
                          const std::vector<nn::Var>& tgt_reps,
                          const VectorDiscriminator& disc, double lambda,
                          AlignCounters* counters = nullptr);

}  // namespace uda
