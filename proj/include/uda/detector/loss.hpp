#pragma once

#include <array>

#include "uda/detector/codec.hpp"
#include "uda/nn/ops.hpp"

namespace uda {

/// Supervised detection loss for one image: smooth-L1 on encoded box offsets
/// at assigned cells, binary cross-entropy on objectness over all cells, and
/// per-class binary cross-entropy at assigned cells.
/// raw: per-scale [5+C, G, G] vars.
nn::Var supervised_loss(const std::array<nn::Var, kScaleCount>& raw, const DetectionSet& truth,
                        const DetectorConfig& cfg);

/// Mean of supervised_loss over a batch; raw holds [N, 5+C, G, G] per scale.
nn::Var supervised_loss_batch(const std::array<nn::Var, kScaleCount>& raw,
                              const std::vector<DetectionSet>& truth,
                              const DetectorConfig& cfg);

}  // namespace uda
