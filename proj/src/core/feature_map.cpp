#include "uda/core/feature_map.hpp"

#include <stdexcept>

namespace uda {

const char* to_string(ScaleTag tag) {
  switch (tag) {
    case ScaleTag::Large: return "large";
    case ScaleTag::Medium: return "medium";
    case ScaleTag::Small: return "small";
  }
  return "?";
}

void ScaleSet::validate() const {
  for (int i = 0; i < kScaleCount; ++i) {
    if (maps[i].scale_tag != static_cast<ScaleTag>(i))
      throw std::invalid_argument("ScaleSet: tags out of order");
    if (maps[i].data.rank() != 3) throw std::invalid_argument("ScaleSet: maps must be rank 3");
  }
  if (!(maps[0].height() > maps[1].height() && maps[1].height() > maps[2].height()))
    throw std::invalid_argument("ScaleSet: resolutions must strictly decrease");
}

std::vector<double> flatten(const FeatureMap& f) {
  return {f.data.data(), f.data.data() + f.data.size()};
}

FeatureMap unflatten(const std::vector<double>& v, int channels, int height, int width,
                     ScaleTag tag) {
  if (static_cast<std::int64_t>(v.size()) !=
      static_cast<std::int64_t>(channels) * height * width)
    throw std::invalid_argument("unflatten: size mismatch");
  FeatureMap f;
  f.data = nn::Tensor({channels, height, width}, v);
  f.scale_tag = tag;
  return f;
}

}  // namespace uda
