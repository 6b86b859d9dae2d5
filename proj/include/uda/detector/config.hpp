#pragma once

#include <array>
#include <stdexcept>

namespace uda {

/// Shape parameters of the detector. Neck channels and strides are indexed by
/// ScaleTag (large/medium/small spatial resolution).
struct DetectorConfig {
  int input_size = 160;
  int class_count = 1;
  int backbone_channels = 32;
  std::array<int, 3> neck_channels = {32, 48, 64};  // large, medium, small maps
  std::array<int, 3> strides = {8, 16, 32};         // large, medium, small maps

  int grid(int scale) const { return input_size / strides[static_cast<std::size_t>(scale)]; }
  int head_channels() const { return 5 + class_count; }

  void validate() const {
    if (class_count < 1) throw std::invalid_argument("DetectorConfig: class_count must be >= 1");
    if (input_size % strides[2] != 0)
      throw std::invalid_argument("DetectorConfig: input_size must be divisible by the largest stride");
    if (backbone_channels < 4)
      throw std::invalid_argument("DetectorConfig: backbone_channels must be >= 4");
  }
};

}  // namespace uda
