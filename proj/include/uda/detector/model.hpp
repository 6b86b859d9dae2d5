#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "uda/core/feature_map.hpp"
#include "uda/detector/config.hpp"
#include "uda/nn/ops.hpp"

namespace uda {

/// Batched forward products. `raw` holds head outputs per scale,
/// shape [N, 5+C, G, G] with channel layout (tx, ty, tw, th, obj, cls...).
struct BatchOutput {
  nn::Var global;                          // [N, Cb, S/8, S/8]
  std::array<nn::Var, kScaleCount> inst;   // pre-head per-scale features
  std::array<nn::Var, kScaleCount> raw;    // head outputs
};

/// Single-image forward products as plain values.
struct DetectorOutput {
  FeatureMap global_features;
  ScaleSet instance_features;
  std::array<nn::Tensor, kScaleCount> raw_predictions;
};

/// One-stage anchor-free detector: a 3-block strided backbone, a 2-block
/// downsampling trunk with top-down lateral merges, and a 1x1 head per scale.
class Detector {
 public:
  Detector(DetectorConfig cfg, std::uint64_t seed);

  const DetectorConfig& config() const { return cfg_; }

  /// images: [N, 1, S, S] with values in [0,1].
  BatchOutput forward(const nn::Var& images) const;

  /// Value-only forward for a single H x W image (throws on size mismatch).
  DetectorOutput forward_image(const nn::Tensor& image) const;

  std::vector<nn::Var> parameters() const;
  std::vector<nn::Var> backbone_parameters() const;

  /// Named parameters for checkpointing, prefixed with `prefix.`.
  void collect_parameters(const std::string& prefix,
                          std::map<std::string, nn::Var>& out) const;

 private:
  struct Conv {
    nn::Var w, b;
  };
  Conv make_conv(int out_ch, int in_ch, int k, std::mt19937_64& rng);

  DetectorConfig cfg_;
  Conv b1_, b2_, b3_;          // backbone, stride 2 each
  Conv down_m_, down_s_;       // trunk downsamples past the backbone
  Conv lat_l_, lat_m_, lat_s_; // lateral 1x1 projections
  Conv td_ml_, td_sm_;         // top-down channel adapters
  std::array<Conv, kScaleCount> heads_;
};

}  // namespace uda
