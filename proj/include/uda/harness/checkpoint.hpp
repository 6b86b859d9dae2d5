#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "uda/align/discriminator.hpp"
#include "uda/align/instance.hpp"
#include "uda/detector/model.hpp"
#include "uda/harness/train_config.hpp"

namespace uda {

/// All learnable modules a method needs, built deterministically from the
/// config seed. Modules not used by the method stay null.
struct ModelBundle {
  TrainConfig cfg;
  std::unique_ptr<Detector> detector;
  std::unique_ptr<ConvDiscriminator> global_disc;
  std::array<std::unique_ptr<VectorDiscriminator>, kScaleCount> instance_discs;
  std::array<std::unique_ptr<ConvDiscriminator>, kScaleCount> feature_discs;
  std::array<std::unique_ptr<ChannelAttention>, kScaleCount> attentions;

  static ModelBundle build(const TrainConfig& cfg);

  /// Embedding length fed to instance discriminators at one scale.
  static int embedding_dim(const TrainConfig& cfg, int scale);

  std::map<std::string, nn::Var> named_parameters() const;
  std::vector<nn::Var> all_parameters() const;
};

/// Self-describing binary container: serialized config followed by named
/// parameter tensors. Loading restores values bit-exactly.
void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);

struct Checkpoint {
  TrainConfig cfg;
  std::map<std::string, nn::Tensor> values;
};
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the bundle for the stored config and assigns parameter values.
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace uda
