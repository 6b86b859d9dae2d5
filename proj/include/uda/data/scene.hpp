#pragma once

#include <cstdint>
#include <vector>

#include "uda/core/geometry.hpp"
#include "uda/nn/tensor.hpp"

namespace uda {

enum class TerrainKind { Crater = 0, Dune = 1, Mountain = 2, Boulder = 3 };

const char* to_string(TerrainKind kind);

/// Appearance-only transforms; object geometry never depends on these.
struct ShiftParams {
  bool invert = false;
  double blur_radius = 0.0;  // Gaussian sigma in pixels, 0 disables
  double noise_std = 0.02;
  double texture_frequency = 6.0;  // value-noise lattice cells across the image
};

/// Full recipe for one synthetic scene. Identical specs render byte-identical
/// scenes; specs differing only in `shift` share identical object geometry.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<TerrainKind> classes;  // label class_id = index into this list
  int min_objects = 1;
  int max_objects = 4;
  ShiftParams shift;
};

struct LabeledImage {
  nn::Tensor image;  // [H,W], values in [0,1]
  DetectionSet truth;
  bool unlabeled = false;
  int placement_failures = 0;
};

LabeledImage render(const SceneSpec& spec, int size);

}  // namespace uda
