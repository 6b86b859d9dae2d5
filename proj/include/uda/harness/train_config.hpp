#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uda/detector/config.hpp"

namespace uda {

enum class Method {
  SourceOnly,
  TargetOnly,
  InstAdvVisga,
  InstAdvPc,
  InstAdvPcSff,
  InstConVisga,
  InstConPc,
  InstConPcSff,
  FeatAdvYocov1,
  FeatAdvPcKmeans,
  FeatAdvPtap,
};

constexpr int kMethodCount = 11;

Method method_from_string(const std::string& name);
const char* to_string(Method m);
std::vector<std::string> all_method_names();

/// Which loss terms a method composes.
struct MethodTraits {
  bool uses_target = false;       // forwards a target batch
  bool global_adv = false;        // image-level adversarial term
  bool instance = false;          // instance clustering term
  bool contrastive = false;       // contrastive rather than adversarial instances
  bool sff = false;               // strong feature filtering before embedding
  bool pc = false;                // perceptual consistency term
  enum class Feature { None, Hierarchical, KMeans, Ptap } feature = Feature::None;
};

MethodTraits traits_of(Method m);

struct TrainConfig {
  Method method = Method::SourceOnly;
  int epochs = 50;
  int batch_size = 32;
  double lambda_img = 1.0;
  double lambda_inst = 1.0;
  double lambda_pc = 1.0;
  double lr = 0.02;
  double lr_floor_ratio = 0.05;
  double momentum = 0.9;
  double grad_clip = 10.0;  // global norm, <=0 disables
  std::uint64_t seed = 0;

  // alignment hyperparameters
  double merge_threshold = 0.1;
  double keep_fraction = 0.5;
  double margin = 1.0;
  double conf_threshold = 0.25;  // instance sourcing during training
  double nms_iou = 0.7;
  int pool_size = 3;
  int attention_kernel = 3;
  double grl_lambda = 1.0;
  bool pc_normalize = false;
  bool contrastive_on_representatives = true;
  int kmeans_k = 2;
  int kmeans_max_iter = 50;
  int max_instances_per_image = 8;
  int val_interval = 5;  // epochs between validation passes (when a val split is given)

  DetectorConfig detector;

  void validate() const;
  MethodTraits traits() const { return traits_of(method); }
};

/// Flat `key = value` round trip; every field above is addressable by key.
std::string serialize_config(const TrainConfig& cfg);
void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value);
TrainConfig parse_config(const std::string& text);
TrainConfig load_config_file(const std::filesystem::path& path);

/// FNV-1a hash of the serialized config, for report provenance.
std::string config_fingerprint(const TrainConfig& cfg);

}  // namespace uda
