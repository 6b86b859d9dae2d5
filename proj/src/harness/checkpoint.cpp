#include "uda/harness/checkpoint.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace uda {

namespace {
constexpr char kMagic[8] = {'U', 'D', 'A', 'C', 'K', 'P', 'T', '1'};
}

int ModelBundle::embedding_dim(const TrainConfig& cfg, int scale) {
  const int c = cfg.detector.neck_channels[static_cast<std::size_t>(scale)];
  const int kept = cfg.traits().sff
                       ? static_cast<int>(std::ceil(cfg.keep_fraction * c))
                       : c;
  return kept * cfg.pool_size * cfg.pool_size;
}

ModelBundle ModelBundle::build(const TrainConfig& cfg) {
  cfg.validate();
  const MethodTraits traits = cfg.traits();
  ModelBundle b;
  b.cfg = cfg;
  b.detector = std::make_unique<Detector>(cfg.detector, cfg.seed);
  if (traits.global_adv)
    b.global_disc =
        std::make_unique<ConvDiscriminator>(cfg.detector.backbone_channels, cfg.seed + 101);
  if (traits.instance && !traits.contrastive)
    for (int s = 0; s < kScaleCount; ++s)
      b.instance_discs[static_cast<std::size_t>(s)] = std::make_unique<VectorDiscriminator>(
          embedding_dim(cfg, s), cfg.seed + 201 + static_cast<std::uint64_t>(s));
  if (traits.feature != MethodTraits::Feature::None)
    for (int s = 0; s < kScaleCount; ++s)
      b.feature_discs[static_cast<std::size_t>(s)] = std::make_unique<ConvDiscriminator>(
          1, cfg.seed + 301 + static_cast<std::uint64_t>(s));
  if (traits.sff || traits.feature == MethodTraits::Feature::Ptap)
    for (int s = 0; s < kScaleCount; ++s)
      b.attentions[static_cast<std::size_t>(s)] = std::make_unique<ChannelAttention>(
          cfg.attention_kernel, cfg.seed + 401 + static_cast<std::uint64_t>(s));
  return b;
}

std::map<std::string, nn::Var> ModelBundle::named_parameters() const {
  std::map<std::string, nn::Var> out;
  detector->collect_parameters("detector", out);
  if (global_disc) global_disc->collect_parameters("disc_global", out);
  for (int s = 0; s < kScaleCount; ++s) {
    const std::string suffix = to_string(static_cast<ScaleTag>(s));
    if (instance_discs[static_cast<std::size_t>(s)])
      instance_discs[static_cast<std::size_t>(s)]->collect_parameters("disc_inst_" + suffix, out);
    if (feature_discs[static_cast<std::size_t>(s)])
      feature_discs[static_cast<std::size_t>(s)]->collect_parameters("disc_feat_" + suffix, out);
    if (attentions[static_cast<std::size_t>(s)])
      attentions[static_cast<std::size_t>(s)]->collect_parameters("attention_" + suffix, out);
  }
  return out;
}

std::vector<nn::Var> ModelBundle::all_parameters() const {
  std::vector<nn::Var> out;
  for (auto& [name, var] : named_parameters()) out.push_back(var);
  return out;
}

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));

  const std::string cfg_text = serialize_config(bundle.cfg);
  const std::uint64_t cfg_len = cfg_text.size();
  out.write(reinterpret_cast<const char*>(&cfg_len), sizeof(cfg_len));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  const auto params = bundle.named_parameters();
  const std::uint64_t count = params.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, var] : params) {
    const std::uint64_t name_len = name.size();
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const std::uint64_t rank = static_cast<std::uint64_t>(var->value.rank());
    out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    for (int d : var->value.shape()) {
      const std::int64_t dim = d;
      out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    }
    out.write(reinterpret_cast<const char*>(var->value.data()),
              static_cast<std::streamsize>(var->value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("read_checkpoint: not a checkpoint file: " + path.string());

  std::uint64_t cfg_len = 0;
  in.read(reinterpret_cast<char*>(&cfg_len), sizeof(cfg_len));
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));

  Checkpoint ck;
  ck.cfg = parse_config(cfg_text);

  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    std::uint64_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      std::int64_t dim = 0;
      in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
      d = static_cast<int>(dim);
    }
    nn::Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("read_checkpoint: truncated file " + path.string());
    ck.values.emplace(std::move(name), std::move(t));
  }
  return ck;
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  ModelBundle bundle = ModelBundle::build(ck.cfg);
  auto params = bundle.named_parameters();
  if (params.size() != ck.values.size())
    throw std::runtime_error("load_checkpoint: parameter set mismatch in " + path.string());
  for (auto& [name, var] : params) {
    auto it = ck.values.find(name);
    if (it == ck.values.end())
      throw std::runtime_error("load_checkpoint: missing parameter " + name);
    if (!it->second.same_shape(var->value))
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    var->value = it->second;
  }
  return bundle;
}

}  // namespace uda
