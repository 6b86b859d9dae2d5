#pragma once

#include <array>
#include <string>
#include <vector>

#include "uda/nn/tensor.hpp"

namespace uda {

/// Scale tags are named by spatial resolution: Large is the finest map,
/// Small the coarsest.
enum class ScaleTag { Large = 0, Medium = 1, Small = 2 };

constexpr int kScaleCount = 3;
const char* to_string(ScaleTag tag);

/// One activation volume (channels x height x width).
struct FeatureMap {
  nn::Tensor data;  // rank 3
  ScaleTag scale_tag = ScaleTag::Large;

  int channels() const { return data.dim(0); }
  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }
};

/// Ordered triple of maps with strictly decreasing spatial resolution.
struct ScaleSet {
  std::array<FeatureMap, kScaleCount> maps;

  const FeatureMap& at(ScaleTag tag) const { return maps[static_cast<int>(tag)]; }
  FeatureMap& at(ScaleTag tag) { return maps[static_cast<int>(tag)]; }
  /// Throws std::invalid_argument when ordering or tags are inconsistent.
  void validate() const;
};

/// Row-major (channel, row, column) flattening.
std::vector<double> flatten(const FeatureMap& f);
FeatureMap unflatten(const std::vector<double>& v, int channels, int height, int width,
                     ScaleTag tag = ScaleTag::Large);

}  // namespace uda
