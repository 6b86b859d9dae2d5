#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uda/data/scene.hpp"

namespace uda {

struct Dataset {
  std::vector<LabeledImage> images;
  std::vector<std::string> class_names;  // indexed by class_id
  bool unlabeled = false;
};

/// Writes one split: 8-bit PGM per image, a sibling `class_id cx cy w h`
/// label file per labeled image (6 decimal places), and a JSON manifest with
/// class names and file pairs. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir,
            const std::string& split);

/// Inverse of write_dataset. Malformed label lines raise errors naming the
/// file and line number; unlabeled splits load with empty detections.
Dataset read_dataset(const std::filesystem::path& dir, const std::string& split);

// ---- 8-bit grayscale PGM (binary P5) ----------------------------------------
void write_pgm(const nn::Tensor& image, const std::filesystem::path& path);
nn::Tensor read_pgm(const std::filesystem::path& path);

// ---- named generation recipes ------------------------------------------------
struct Recipe {
  std::string name;
  std::vector<TerrainKind> classes;
  std::vector<std::string> class_names;
  int train_count = 400;
  int test_count = 100;
  int min_objects = 1;
  int max_objects = 4;
  ShiftParams source_shift;
  ShiftParams target_shift;
};

/// 3-class terrain recipe (crater/dune/mountain).
Recipe recipe_mini_mars();
/// Single-class recipe (boulder).
Recipe recipe_mini_asteroid();
Recipe recipe_by_name(const std::string& name);

/// Renders and writes four splits under out_dir: train_source (labeled),
/// train_target (unlabeled), train_target_labeled (same scenes as
/// train_target, labels kept for oracle training), test_target (labeled).
/// Source/target training pairs share geometry seeds, so their boxes match.
void generate_recipe(const Recipe& recipe, std::uint64_t seed, const std::filesystem::path& out_dir,
                     int image_size);

}  // namespace uda
