#include "uda/data/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace uda {

namespace fs = std::filesystem;
using nlohmann::json;

void write_pgm(const nn::Tensor& image, const fs::path& path) {
  if (image.rank() != 2) throw std::invalid_argument("write_pgm: expected [H,W]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
  out << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.dim(1)));
  for (int y = 0; y < image.dim(0); ++y) {
    for (int x = 0; x < image.dim(1); ++x) {
      const double v = std::clamp(image[static_cast<std::int64_t>(y) * image.dim(1) + x], 0.0, 1.0);
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

nn::Tensor read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("read_pgm: unsupported format in " + path.string());
  in.get();  // single whitespace after header
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("read_pgm: truncated file " + path.string());
  nn::Tensor img({h, w});
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img[static_cast<std::int64_t>(i)] = bytes[i] / 255.0;
  return img;
}

namespace {

std::string image_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%06zu.pgm", index);
  return buf;
}

std::string label_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%06zu.txt", index);
  return buf;
}

void write_labels(const DetectionSet& truth, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_labels: cannot open " + path.string());
  char line[128];
  for (const Detection& d : truth) {
    std::snprintf(line, sizeof(line), "%d %.6f %.6f %.6f %.6f\n", d.class_id, d.box.cx, d.box.cy,
                  d.box.w, d.box.h);
    out << line;
  }
  if (!out) throw std::runtime_error("write_labels: write failed for " + path.string());
}

DetectionSet read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_labels: cannot open " + path.string());
  DetectionSet out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Detection d;
    std::string extra;
    if (!(ss >> d.class_id >> d.box.cx >> d.box.cy >> d.box.w >> d.box.h) || (ss >> extra) ||
        d.class_id < 0 || !d.box.valid()) {
      throw std::runtime_error("read_labels: malformed line " + std::to_string(line_no) + " in " +
                               path.string());
    }
    d.confidence = 1.0;
    out.push_back(d);
  }
  return out;
}

}  // namespace

fs::path write_dataset(const Dataset& data, const fs::path& dir, const std::string& split) {
  const fs::path split_dir = dir / split;
  std::error_code ec;
  fs::create_directories(split_dir, ec);
  if (ec) throw std::runtime_error("write_dataset: cannot create " + split_dir.string());

  json manifest;
  manifest["classes"] = data.class_names;
  manifest["unlabeled"] = data.unlabeled;
  json items = json::array();
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const LabeledImage& li = data.images[i];
    const std::string img = image_name(i);
    write_pgm(li.image, split_dir / img);
    json item;
    item["image"] = img;
    if (data.unlabeled) {
      item["labels"] = nullptr;
    } else {
      const std::string lbl = label_name(i);
      write_labels(li.truth, split_dir / lbl);
      item["labels"] = lbl;
    }
    items.push_back(item);
  }
  manifest["items"] = items;

  const fs::path manifest_path = split_dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + manifest_path.string());
  out << manifest.dump(2) << "\n";
  return manifest_path;
}

Dataset read_dataset(const fs::path& dir, const std::string& split) {
  const fs::path split_dir = dir / split;
  const fs::path manifest_path = split_dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("read_dataset: missing manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("read_dataset: bad manifest " + manifest_path.string() + ": " +
                             e.what());
  }

  Dataset data;
  data.class_names = manifest.at("classes").get<std::vector<std::string>>();
  data.unlabeled = manifest.value("unlabeled", false);
  for (const auto& item : manifest.at("items")) {
    LabeledImage li;
    li.image = read_pgm(split_dir / item.at("image").get<std::string>());
    if (item.contains("labels") && !item.at("labels").is_null()) {
      li.truth = read_labels(split_dir / item.at("labels").get<std::string>());
      for (const Detection& d : li.truth)
        if (d.class_id >= static_cast<int>(data.class_names.size()))
          throw std::runtime_error("read_dataset: class_id out of range in " +
                                   item.at("labels").get<std::string>());
    } else {
      li.unlabeled = true;
    }
    data.images.push_back(std::move(li));
  }
  return data;
}

Recipe recipe_mini_mars() {
  Recipe r;
  r.name = "mini-mars";
  r.classes = {TerrainKind::Crater, TerrainKind::Dune, TerrainKind::Mountain};
  r.class_names = {"crater", "dune", "mountain"};
  r.target_shift.invert = true;
  r.target_shift.blur_radius = 1.0;
  return r;
}

Recipe recipe_mini_asteroid() {
  Recipe r;
  r.name = "mini-asteroid";
  r.classes = {TerrainKind::Boulder};
  r.class_names = {"boulder"};
  r.target_shift.invert = true;
  r.target_shift.blur_radius = 1.0;
  return r;
}

Recipe recipe_by_name(const std::string& name) {
  if (name == "mini-mars") return recipe_mini_mars();
  if (name == "mini-asteroid") return recipe_mini_asteroid();
  throw std::invalid_argument("unknown recipe: " + name);
}

void generate_recipe(const Recipe& recipe, std::uint64_t seed, const fs::path& out_dir,
                     int image_size) {
  auto scene = [&](std::uint64_t s, const ShiftParams& shift) {
    SceneSpec spec;
    spec.seed = s;
    spec.classes = recipe.classes;
    spec.min_objects = recipe.min_objects;
    spec.max_objects = recipe.max_objects;
    spec.shift = shift;
    return render(spec, image_size);
  };

  Dataset src, tgt, tgt_labeled, test;
  src.class_names = tgt.class_names = tgt_labeled.class_names = test.class_names =
      recipe.class_names;
  tgt.unlabeled = true;
  for (int i = 0; i < recipe.train_count; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    src.images.push_back(scene(s, recipe.source_shift));
    LabeledImage t = scene(s, recipe.target_shift);  // same geometry, shifted appearance
    tgt_labeled.images.push_back(t);
    t.unlabeled = true;
    tgt.images.push_back(std::move(t));
  }
  for (int i = 0; i < recipe.test_count; ++i) {
    const std::uint64_t s = seed + 1000000ULL + static_cast<std::uint64_t>(i);
    test.images.push_back(scene(s, recipe.target_shift));
  }

  write_dataset(src, out_dir, "train_source");
  write_dataset(tgt, out_dir, "train_target");
  write_dataset(tgt_labeled, out_dir, "train_target_labeled");
  write_dataset(test, out_dir, "test_target");
}

}  // namespace uda
