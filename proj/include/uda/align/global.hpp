#pragma once

#include "uda/align/discriminator.hpp"
#include "uda/nn/ops.hpp"

namespace uda {

/// Call-site instrumentation shared by the alignment losses.
struct AlignCounters {
  long grl_calls = 0;
  long disc_global_calls = 0;
  long disc_instance_calls = 0;
  long disc_feature_calls = 0;
  long pc_calls = 0;
  long contrastive_calls = 0;
  long instance_cluster_calls = 0;
  long feature_cluster_calls = 0;
  long ptap_calls = 0;
  long skipped_instance_batches = 0;
  long empty_domain_skips = 0;
  long dropped_instances = 0;
};

/// Binary cross-entropy of a domain logit against domain label d (0 source,
/// 1 target), with probabilities clamped away from 0 and 1.
nn::Var adv_loss(const nn::Var& logit, int d);

/// Adversarial global alignment of one source/target feature-map pair (or
/// batch pair): the discriminator sees gradient-reversed features from both
/// domains. Per-domain losses are averaged over the batch dimension.
nn::Var img_loss(const nn::Var& fs, const nn::Var& ft, const ConvDiscriminator& disc,
                 double lambda, AlignCounters* counters = nullptr);

}  // namespace uda
