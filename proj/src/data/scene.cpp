#include "uda/data/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace uda {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Light from the upper-left; shadows fall toward the lower-right.
constexpr double kLightX = -0.70710678, kLightY = -0.70710678;

struct ObjectShape {
  TerrainKind kind;
  int class_id;
  double cx, cy;  // pixels
  // Kind-specific parameters.
  double r = 0;                     // crater/mountain radius
  double a = 0, b = 0, theta = 0;   // boulder ellipse
  double len = 0, width = 0, amp = 0, waves = 0;  // dune ridge
  Box footprint;                    // normalized label box
};

Box footprint_box(double cx, double cy, double ex, double ey, int size) {
  Box box;
  box.cx = cx / size;
  box.cy = cy / size;
  box.w = 2.0 * ex / size;
  box.h = 2.0 * ey / size;
  return box;
}

bool inside_margin(double cx, double cy, double ex, double ey, int size) {
  const double m = 2.0;
  return cx - ex >= m && cx + ex <= size - m && cy - ey >= m && cy + ey <= size - m;
}

// Smooth value noise: bilinear interpolation of a random lattice with a
// smoothstep on the fractional coordinate.
class ValueNoise {
 public:
  ValueNoise(std::mt19937_64& rng, double frequency, int size) : n_(std::max(1, static_cast<int>(std::ceil(frequency)))), size_(size) {
    lattice_.resize(static_cast<std::size_t>(n_ + 1) * (n_ + 1));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : lattice_) v = u(rng);
  }

  double operator()(double x, double y) const {
    const double fx = x / size_ * n_;
    const double fy = y / size_ * n_;
    const int ix = std::min(n_ - 1, static_cast<int>(fx));
    const int iy = std::min(n_ - 1, static_cast<int>(fy));
    const double tx = smooth(fx - ix);
    const double ty = smooth(fy - iy);
    const double v00 = at(ix, iy), v10 = at(ix + 1, iy);
    const double v01 = at(ix, iy + 1), v11 = at(ix + 1, iy + 1);
    return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double at(int x, int y) const { return lattice_[static_cast<std::size_t>(y) * (n_ + 1) + x]; }
  int n_;
  int size_;
  std::vector<double> lattice_;
};

ObjectShape draw_shape(TerrainKind kind, int class_id, std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  ObjectShape o;
  o.kind = kind;
  o.class_id = class_id;
  switch (kind) {
    case TerrainKind::Crater: {
      o.r = uniform(0.045, 0.13) * size;
      o.cx = uniform(o.r + 2, size - o.r - 2);
      o.cy = uniform(o.r + 2, size - o.r - 2);
      o.footprint = footprint_box(o.cx, o.cy, o.r, o.r, size);
      break;
    }
    case TerrainKind::Mountain: {
      o.r = uniform(0.05, 0.12) * size;
      o.cx = uniform(o.r + 2, size - o.r - 2);
      o.cy = uniform(o.r + 2, size - o.r - 2);
      o.footprint = footprint_box(o.cx, o.cy, o.r, o.r, size);
      break;
    }
    case TerrainKind::Boulder: {
      o.a = uniform(0.035, 0.09) * size;
      o.b = o.a * uniform(0.6, 1.0);
      o.theta = uniform(0.0, kPi);
      // Footprint covers the body plus the cast shadow (shifted 0.6a downwind).
      const double ex_body = std::sqrt(o.a * o.a * std::cos(o.theta) * std::cos(o.theta) +
                                       o.b * o.b * std::sin(o.theta) * std::sin(o.theta));
      const double ey_body = std::sqrt(o.a * o.a * std::sin(o.theta) * std::sin(o.theta) +
                                       o.b * o.b * std::cos(o.theta) * std::cos(o.theta));
      const double shift = 0.6 * o.a;
      const double ex = ex_body + 0.5 * shift;
      const double ey = ey_body + 0.5 * shift;
      const double margin = ex + 2;
      o.cx = uniform(margin, size - margin) - 0.25 * shift;
      o.cy = uniform(margin, size - margin) - 0.25 * shift;
      // Box centered midway between body and shadow extents.
      o.footprint = footprint_box(o.cx + 0.25 * shift, o.cy + 0.25 * shift, ex, ey, size);
      break;
    }
    case TerrainKind::Dune: {
      o.len = uniform(0.14, 0.30) * size;
      o.width = uniform(0.035, 0.08) * size;
      o.amp = 0.3 * o.width;
      o.waves = uniform(1.0, 2.5);
      o.theta = uniform(-0.5, 0.5);
      const double hv = 0.5 * o.width + o.amp;
      const double ex = 0.5 * o.len * std::abs(std::cos(o.theta)) + hv * std::abs(std::sin(o.theta));
      const double ey = 0.5 * o.len * std::abs(std::sin(o.theta)) + hv * std::abs(std::cos(o.theta));
      o.cx = uniform(ex + 2, size - ex - 2);
      o.cy = uniform(ey + 2, size - ey - 2);
      o.footprint = footprint_box(o.cx, o.cy, ex, ey, size);
      break;
    }
  }
  return o;
}

void draw_object(nn::Tensor& img, const ObjectShape& o, int size) {
  const int x0 = std::max(0, static_cast<int>(std::floor(o.footprint.x0() * size)) - 1);
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(o.footprint.x1() * size)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(o.footprint.y0() * size)) - 1);
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(o.footprint.y1() * size)) + 1);
  auto px = [&](int y, int x) -> double& {
    return img[static_cast<std::int64_t>(y) * size + x];
  };

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - o.cx;
      const double dy = y + 0.5 - o.cy;
      switch (o.kind) {
        case TerrainKind::Crater: {
          const double d = std::sqrt(dx * dx + dy * dy);
          const double rim_in = 0.72 * o.r;
          if (d >= rim_in && d <= o.r) {
            px(y, x) += 0.34 * std::sin(kPi * (d - rim_in) / (o.r - rim_in));
          } else if (d < rim_in && d > 1e-9) {
            const double toward_light = (dx * kLightX + dy * kLightY) / d;
            if (toward_light > 0) px(y, x) -= 0.26 * toward_light * (d / rim_in);
          }
          break;
        }
        case TerrainKind::Mountain: {
          const double d = std::sqrt(dx * dx + dy * dy);
          if (d < o.r) {
            const double hgt = 1.0 - d / o.r;
            const double toward_light = d > 1e-9 ? (dx * kLightX + dy * kLightY) / d : 0.0;
            px(y, x) += hgt * (0.16 + 0.30 * toward_light);
          }
          break;
        }
        case TerrainKind::Boulder: {
          const double ct = std::cos(o.theta), st = std::sin(o.theta);
          const double lx = (dx * ct + dy * st) / o.a;
          const double ly = (-dx * st + dy * ct) / o.b;
          const double rho2 = lx * lx + ly * ly;
          if (rho2 <= 1.0) {
            px(y, x) += 0.32 * (1.0 - 0.35 * rho2);
          } else {
            // cast shadow, downwind of the light
            const double sx = dx + 0.6 * o.a * kLightX;
            const double sy = dy + 0.6 * o.a * kLightY;
            const double slx = (sx * ct + sy * st) / (0.9 * o.a);
            const double sly = (-sx * st + sy * ct) / (0.7 * o.b);
            if (slx * slx + sly * sly <= 1.0) px(y, x) -= 0.24;
          }
          break;
        }
        case TerrainKind::Dune: {
          const double ct = std::cos(o.theta), st = std::sin(o.theta);
          const double u = dx * ct + dy * st;
          const double v = -dx * st + dy * ct;
          if (std::abs(u) > 0.5 * o.len) break;
          const double ridge = o.amp * std::sin(2.0 * kPi * o.waves * u / o.len);
          const double t = (v - ridge) / o.width;
          if (std::abs(t) > 0.5) break;
          const double taper = std::min(1.0, (0.5 * o.len - std::abs(u)) / (0.1 * o.len));
          px(y, x) += 0.32 * std::cos(kPi * t) * (0.5 - t) * taper;
          break;
        }
      }
    }
  }
}

void gaussian_blur(nn::Tensor& img, double sigma, int size) {
  const int half = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double norm = 0;
  for (int i = -half; i <= half; ++i) {
    kernel[static_cast<std::size_t>(i + half)] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + half)];
  }
  for (auto& k : kernel) k /= norm;

  auto reflect = [size](int i) {
    if (i < 0) return -i - 1;
    if (i >= size) return 2 * size - 1 - i;
    return i;
  };
  nn::Tensor tmp({size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double acc = 0;
      for (int i = -half; i <= half; ++i)
        acc += kernel[static_cast<std::size_t>(i + half)] *
               img[static_cast<std::int64_t>(y) * size + reflect(x + i)];
      tmp[static_cast<std::int64_t>(y) * size + x] = acc;
    }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double acc = 0;
      for (int i = -half; i <= half; ++i)
        acc += kernel[static_cast<std::size_t>(i + half)] *
               tmp[static_cast<std::int64_t>(reflect(y + i)) * size + x];
      img[static_cast<std::int64_t>(y) * size + x] = acc;
    }
}

}  // namespace

const char* to_string(TerrainKind kind) {
  switch (kind) {
    case TerrainKind::Crater: return "crater";
    case TerrainKind::Dune: return "dune";
    case TerrainKind::Mountain: return "mountain";
    case TerrainKind::Boulder: return "boulder";
  }
  return "?";
}

LabeledImage render(const SceneSpec& spec, int size) {
  if (spec.classes.empty()) throw std::invalid_argument("render: empty class set");
  if (spec.min_objects < 0 || spec.max_objects < spec.min_objects)
    throw std::invalid_argument("render: bad object count range");

  // Independent streams keep geometry identical across appearance changes.
  std::mt19937_64 geom_rng(spec.seed);
  std::mt19937_64 tex_rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  std::mt19937_64 noise_rng(spec.seed ^ 0xC2B2AE3D27D4EB4FULL);

  LabeledImage out;
  out.image = nn::Tensor({size, size});

  // Geometry pass.
  std::uniform_int_distribution<int> count_dist(spec.min_objects, spec.max_objects);
  const int target_count = count_dist(geom_rng);
  std::uniform_int_distribution<int> class_dist(0, static_cast<int>(spec.classes.size()) - 1);
  std::vector<ObjectShape> objects;
  for (int i = 0; i < target_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const int ci = class_dist(geom_rng);
      ObjectShape o = draw_shape(spec.classes[static_cast<std::size_t>(ci)], ci, geom_rng, size);
      const double ex = 0.5 * o.footprint.w * size;
      const double ey = 0.5 * o.footprint.h * size;
      if (!inside_margin(o.footprint.cx * size, o.footprint.cy * size, ex, ey, size)) continue;
      bool overlaps = false;
      for (const auto& other : objects)
        if (iou(o.footprint, other.footprint) > 0.3) {
          overlaps = true;
          break;
        }
      if (overlaps) continue;
      objects.push_back(o);
      placed = true;
    }
    if (!placed) ++out.placement_failures;
  }

  // Appearance pass.
  ValueNoise texture(tex_rng, spec.shift.texture_frequency, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      out.image[static_cast<std::int64_t>(y) * size + x] =
          0.55 + 0.10 * texture(x + 0.5, y + 0.5);
  for (const auto& o : objects) draw_object(out.image, o, size);

  // Domain shift, applied after rendering.
  if (spec.shift.invert)
    for (std::int64_t i = 0; i < out.image.size(); ++i) out.image[i] = 1.0 - out.image[i];
  if (spec.shift.blur_radius > 0) gaussian_blur(out.image, spec.shift.blur_radius, size);
  if (spec.shift.noise_std > 0) {
    std::normal_distribution<double> noise(0.0, spec.shift.noise_std);
    for (std::int64_t i = 0; i < out.image.size(); ++i) out.image[i] += noise(noise_rng);
  }
  for (std::int64_t i = 0; i < out.image.size(); ++i)
    out.image[i] = std::clamp(out.image[i], 0.0, 1.0);

  for (const auto& o : objects) {
    Detection d;
    d.class_id = o.class_id;
    d.box = o.footprint;
    d.confidence = 1.0;
    out.truth.push_back(d);
  }
  return out;
}

}  // namespace uda
