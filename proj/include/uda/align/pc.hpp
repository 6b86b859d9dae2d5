#pragma once

#include <array>

#include "uda/core/feature_map.hpp"
#include "uda/nn/ops.hpp"

namespace uda {

/// Scale weights for perceptual consistency: the divisor halves at each
/// coarser scale, so the coarsest map contributes most.
/// Index order follows ScaleTag (large/finest first): (4, 2, 1).
constexpr std::array<double, kScaleCount> kPcWeights = {4.0, 2.0, 1.0};

/// Scale-weighted L1 between source and target per-scale features:
/// sum_i (1/w_i) * |fs_i - ft_i|_1. With `normalize`, each scale uses the
/// per-element mean instead of the raw sum.
nn::Var pc_loss(const std::array<nn::Var, kScaleCount>& fs,
                const std::array<nn::Var, kScaleCount>& ft, bool normalize = false);

/// Value-level convenience over ScaleSets.
double pc_loss_value(const ScaleSet& fs, const ScaleSet& ft, bool normalize = false);

}  // namespace uda
