#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "uda/nn/ops.hpp"

namespace uda {

/// Domain classifier over a feature map: two stride-2 convolutions, global
/// average pooling, and a linear layer producing one logit.
class ConvDiscriminator {
 public:
  ConvDiscriminator(int in_channels, std::uint64_t seed, int hidden = 16);

  /// x: [C,H,W] or [N,C,H,W]. Returns [1] or [N] logits.
  nn::Var logits(const nn::Var& x) const;

  std::vector<nn::Var> parameters() const;
  void collect_parameters(const std::string& prefix,
                          std::map<std::string, nn::Var>& out) const;

 private:
  nn::Var c1w_, c1b_, c2w_, c2b_, lw_, lb_;
  int in_channels_;
};

/// Domain classifier over a fixed-length embedding: two linear layers.
class VectorDiscriminator {
 public:
  VectorDiscriminator(int in_dim, std::uint64_t seed, int hidden = 32);

  /// x: [m]. Returns a [1] logit.
  nn::Var logit(const nn::Var& x) const;

  std::vector<nn::Var> parameters() const;
  void collect_parameters(const std::string& prefix,
                          std::map<std::string, nn::Var>& out) const;

  int input_dim() const { return in_dim_; }

 private:
  nn::Var w1_, b1_, w2_, b2_;
  int in_dim_;
};

}  // namespace uda
