#pragma once

#include <vector>

namespace uda {

/// Axis-aligned box in normalized center format. All coordinates live in
/// [0,1]; width/height are strictly positive.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  bool valid() const {
    return cx >= 0 && cx <= 1 && cy >= 0 && cy <= 1 && w > 0 && w <= 1 && h > 0 && h <= 1;
  }
  double x0() const { return cx - 0.5 * w; }
  double x1() const { return cx + 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double y1() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
};

struct Detection {
  int class_id = 0;
  Box box;
  double confidence = 1.0;
};

using DetectionSet = std::vector<Detection>;

/// Intersection over union in normalized coordinates; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

}  // namespace uda
