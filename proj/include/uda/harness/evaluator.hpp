#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uda/data/dataset.hpp"
#include "uda/detector/model.hpp"

namespace uda {

struct ClassAP {
  int class_id = 0;
  std::string name;
  bool present = false;  // class appears in the ground truth
  double ap = 0.0;
  int ground_truths = 0;
  int detections = 0;
};

struct EvalReport {
  std::vector<ClassAP> per_class;
  double map50 = 0.0;  // mean AP over classes present in the ground truth
  int images = 0;
  int total_detections = 0;
  int total_ground_truths = 0;
  double conf_threshold = 0.25;
  double nms_iou = 0.7;
  double map_iou = 0.5;
  std::string config_fingerprint;
  std::string method;
  std::uint64_t seed = 0;
};

/// Average precision under all-point interpolation (precision envelope) for
/// one class. `matches` holds per-detection (confidence, is_true_positive)
/// sorted arbitrarily; `ground_truth_count` is the recall denominator.
double average_precision(std::vector<std::pair<double, bool>> matches, int ground_truth_count);

/// Per-detection greedy matching against unmatched ground truth at map_iou,
/// per class, detections visited in descending confidence.
EvalReport evaluate(const Detector& detector, const Dataset& split, double conf_threshold = 0.25,
                    double nms_iou = 0.7, double map_iou = 0.5);

void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace uda
