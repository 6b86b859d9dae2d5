#pragma once

#include <array>
#include <vector>

#include "uda/core/feature_map.hpp"
#include "uda/core/geometry.hpp"
#include "uda/detector/config.hpp"
#include "uda/nn/tensor.hpp"

namespace uda {

/// Scale a box is trained/decoded at: the stride whose preferred object size
/// (4x stride, in pixels) is nearest to sqrt(w*h) in log space. Larger boxes
/// map to coarser scales.
int assign_scale(const Box& box, const DetectorConfig& cfg);

/// Dense regression targets for one image at one scale. Box offsets are
/// (center offset within cell in [0,1), log size relative to stride).
struct ScaleTargets {
  nn::Tensor box;    // [4, G, G]
  nn::Tensor obj;    // [G, G], 1 at assigned cells
  nn::Tensor cls;    // [C, G, G], one-hot at assigned cells
  nn::Tensor box_mask;  // [4, G, G], 1 at assigned cells
  nn::Tensor cls_mask;  // [C, G, G], 1 at assigned cells
};

std::array<ScaleTargets, kScaleCount> encode_targets(const DetectionSet& truth,
                                                     const DetectorConfig& cfg);

/// Inverse of the target encoding for one cell; exposed for decode oracles.
Box decode_cell(int scale, int row, int col, double tx, double ty, double tw, double th,
                const DetectorConfig& cfg);

/// Thresholded, per-class greedily NMS-suppressed detections, sorted by
/// descending confidence. Confidence is sigmoid(obj)*sigmoid(cls).
DetectionSet decode(const std::array<nn::Tensor, kScaleCount>& raw, double conf_threshold,
                    double nms_iou, const DetectorConfig& cfg);

/// Greedy per-class suppression of boxes overlapping a kept box by more than
/// nms_iou. Input order is kept stable for equal confidences.
DetectionSet nms(DetectionSet detections, double nms_iou);

}  // namespace uda
