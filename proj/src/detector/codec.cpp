#include "uda/detector/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uda {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int assign_scale(const Box& box, const DetectorConfig& cfg) {
  const double size_px = std::sqrt(box.w * box.h) * cfg.input_size;
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kScaleCount; ++s) {
    const double preferred = 4.0 * cfg.strides[static_cast<std::size_t>(s)];
    const double cost = std::abs(std::log(std::max(size_px, 1e-9) / preferred));
    if (cost < best_cost) {
      best_cost = cost;
      best = s;
    }
  }
  return best;
}

std::array<ScaleTargets, kScaleCount> encode_targets(const DetectionSet& truth,
                                                     const DetectorConfig& cfg) {
  std::array<ScaleTargets, kScaleCount> out;
  for (int s = 0; s < kScaleCount; ++s) {
    const int g = cfg.grid(s);
    auto& t = out[static_cast<std::size_t>(s)];
    t.box = nn::Tensor({4, g, g});
    t.obj = nn::Tensor({g, g});
    t.cls = nn::Tensor({cfg.class_count, g, g});
    t.box_mask = nn::Tensor({4, g, g});
    t.cls_mask = nn::Tensor({cfg.class_count, g, g});
  }
  for (const Detection& d : truth) {
    if (!d.box.valid()) throw std::invalid_argument("encode_targets: invalid box");
    if (d.class_id < 0 || d.class_id >= cfg.class_count)
      throw std::invalid_argument("encode_targets: class_id out of range");
    const int s = assign_scale(d.box, cfg);
    const int g = cfg.grid(s);
    const int col = std::min(g - 1, static_cast<int>(d.box.cx * g));
    const int row = std::min(g - 1, static_cast<int>(d.box.cy * g));
    auto& t = out[static_cast<std::size_t>(s)];
    const double stride = cfg.strides[static_cast<std::size_t>(s)];
    t.box.at(0, row, col) = d.box.cx * g - col;
    t.box.at(1, row, col) = d.box.cy * g - row;
    t.box.at(2, row, col) = std::log(d.box.w * cfg.input_size / stride);
    t.box.at(3, row, col) = std::log(d.box.h * cfg.input_size / stride);
    for (int k = 0; k < 4; ++k) t.box_mask.at(k, row, col) = 1.0;
    t.obj[static_cast<std::int64_t>(row) * g + col] = 1.0;
    t.cls.at(d.class_id, row, col) = 1.0;
    for (int c = 0; c < cfg.class_count; ++c) t.cls_mask.at(c, row, col) = 1.0;
  }
  return out;
}

Box decode_cell(int scale, int row, int col, double tx, double ty, double tw, double th,
                const DetectorConfig& cfg) {
  const int g = cfg.grid(scale);
  const double stride = cfg.strides[static_cast<std::size_t>(scale)];
  Box b;
  b.cx = (col + stable_sigmoid(tx)) / g;
  b.cy = (row + stable_sigmoid(ty)) / g;
  b.w = std::exp(std::clamp(tw, -8.0, 8.0)) * stride / cfg.input_size;
  b.h = std::exp(std::clamp(th, -8.0, 8.0)) * stride / cfg.input_size;
  b.w = std::clamp(b.w, 1e-6, 1.0);
  b.h = std::clamp(b.h, 1e-6, 1.0);
  b.cx = std::clamp(b.cx, 0.0, 1.0);
  b.cy = std::clamp(b.cy, 0.0, 1.0);
  return b;
}

DetectionSet nms(DetectionSet detections, double nms_iou) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.confidence > b.confidence;
                   });
  DetectionSet kept;
  for (const Detection& d : detections) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id == d.class_id && iou(k.box, d.box) > nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

DetectionSet decode(const std::array<nn::Tensor, kScaleCount>& raw, double conf_threshold,
                    double nms_iou, const DetectorConfig& cfg) {
  if (conf_threshold < 0 || conf_threshold > 1 || nms_iou < 0 || nms_iou > 1)
    throw std::invalid_argument("decode: thresholds must lie in [0,1]");
  DetectionSet candidates;
  for (int s = 0; s < kScaleCount; ++s) {
    const nn::Tensor& t = raw[static_cast<std::size_t>(s)];
    if (t.rank() != 3 || t.dim(0) != cfg.head_channels() || t.dim(1) != cfg.grid(s) ||
        t.dim(2) != cfg.grid(s))
      throw std::invalid_argument("decode: prediction grid shape mismatch");
    const int g = cfg.grid(s);
    for (int row = 0; row < g; ++row) {
      for (int col = 0; col < g; ++col) {
        const double obj = stable_sigmoid(t.at(4, row, col));
        if (obj < conf_threshold) continue;  // class probability only lowers the score
        for (int c = 0; c < cfg.class_count; ++c) {
          const double score = obj * stable_sigmoid(t.at(5 + c, row, col));
          if (score < conf_threshold) continue;
          Detection d;
          d.class_id = c;
          d.confidence = score;
          d.box = decode_cell(s, row, col, t.at(0, row, col), t.at(1, row, col),
                              t.at(2, row, col), t.at(3, row, col), cfg);
          candidates.push_back(d);
        }
      }
    }
  }
  return nms(std::move(candidates), nms_iou);
}

}  // namespace uda
