#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "uda/data/scene.hpp"
#include "uda/detector/loss.hpp"
#include "uda/detector/model.hpp"
#include "uda/nn/optim.hpp"

using namespace uda;
using nn::Tensor;
using nn::Var;

namespace {

DetectorConfig small_cfg(int classes = 1) {
  DetectorConfig cfg;
  cfg.input_size = 32;
  cfg.class_count = classes;
  cfg.backbone_channels = 8;
  cfg.neck_channels = {8, 12, 16};
  return cfg;
}

std::array<Tensor, kScaleCount> empty_raw(const DetectorConfig& cfg, double obj_logit) {
  std::array<Tensor, kScaleCount> raw;
  for (int s = 0; s < kScaleCount; ++s) {
    raw[s] = Tensor({cfg.head_channels(), cfg.grid(s), cfg.grid(s)});
    const int g = cfg.grid(s);
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j) raw[s].at(4, i, j) = obj_logit;
  }
  return raw;
}

// Writes predictions that exactly reproduce the encoded targets of d.
void write_perfect(std::array<Tensor, kScaleCount>& raw, const Detection& d,
                   const DetectorConfig& cfg) {
  const auto targets = encode_targets({d}, cfg);
  const int s = assign_scale(d.box, cfg);
  const int g = cfg.grid(s);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      if (targets[s].obj[static_cast<std::int64_t>(i) * g + j] == 0.0) continue;
      const double ox = targets[s].box.at(0, i, j);
      const double oy = targets[s].box.at(1, i, j);
      raw[s].at(0, i, j) = std::log(ox / (1 - ox));
      raw[s].at(1, i, j) = std::log(oy / (1 - oy));
      raw[s].at(2, i, j) = targets[s].box.at(2, i, j);
      raw[s].at(3, i, j) = targets[s].box.at(3, i, j);
      raw[s].at(4, i, j) = 30.0;
      for (int c = 0; c < cfg.class_count; ++c)
        raw[s].at(5 + c, i, j) = c == d.class_id ? 30.0 : -30.0;
    }
}

std::array<Var, kScaleCount> as_vars(const std::array<Tensor, kScaleCount>& raw) {
  return {nn::constant(raw[0]), nn::constant(raw[1]), nn::constant(raw[2])};
}

}  // namespace

TEST_CASE("forward shapes under defaults") {
  DetectorConfig cfg;
  cfg.class_count = 3;
  Detector det(cfg, 1);
  std::mt19937_64 rng(51);
  const Tensor img = oracles::random_tensor({160, 160}, rng, 0.0, 1.0);
  const DetectorOutput out = det.forward_image(img);

  CHECK(out.global_features.data.shape() == std::vector<int>({32, 20, 20}));
  CHECK(out.instance_features.at(ScaleTag::Large).data.shape() == std::vector<int>({32, 20, 20}));
  CHECK(out.instance_features.at(ScaleTag::Medium).data.shape() == std::vector<int>({48, 10, 10}));
  CHECK(out.instance_features.at(ScaleTag::Small).data.shape() == std::vector<int>({64, 5, 5}));
  for (int s = 0; s < kScaleCount; ++s) {
    CHECK(out.raw_predictions[s].dim(0) == 8);  // 4 + 1 + 3
    CHECK(out.raw_predictions[s].dim(1) == 160 / cfg.strides[s]);
  }
  CHECK(out.global_features.data.all_finite());
}

TEST_CASE("forward is deterministic and finite on random inputs") {
  Detector det(small_cfg(2), 5);
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor img = oracles::random_tensor({32, 32}, rng, 0.0, 1.0);
    const DetectorOutput a = det.forward_image(img);
    const DetectorOutput b = det.forward_image(img);
    for (int s = 0; s < kScaleCount; ++s) {
      REQUIRE(a.raw_predictions[s].size() == b.raw_predictions[s].size());
      CHECK(a.raw_predictions[s].all_finite());
      for (std::int64_t i = 0; i < a.raw_predictions[s].size(); ++i)
        CHECK(a.raw_predictions[s][i] == b.raw_predictions[s][i]);
    }
  }
  CHECK_THROWS_AS(det.forward_image(Tensor({16, 16})), std::invalid_argument);
}

TEST_CASE("decode: empty under low objectness; duplicate suppressed by NMS") {
  const DetectorConfig cfg = small_cfg();
  CHECK(decode(empty_raw(cfg, -10.0), 0.25, 0.7, cfg).empty());

  DetectionSet two;
  Detection d;
  d.class_id = 0;
  d.box = {0.5, 0.5, 0.2, 0.2};
  d.confidence = 0.9;
  two.push_back(d);
  d.confidence = 0.8;
  two.push_back(d);
  const DetectionSet kept = nms(two, 0.7);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].confidence == 0.9);
}

TEST_CASE("decode: hand-built single-cell grid matches the offset formula") {
  DetectorConfig cfg = small_cfg();
  auto raw = empty_raw(cfg, -10.0);
  // Coarsest scale has a single cell at stride 32 == input size.
  raw[2].at(0, 0, 0) = 0.4;   // tx
  raw[2].at(1, 0, 0) = -0.2;  // ty
  raw[2].at(2, 0, 0) = -0.3;  // tw
  raw[2].at(3, 0, 0) = -0.5;  // th
  raw[2].at(4, 0, 0) = 3.0;   // objectness
  raw[2].at(5, 0, 0) = 2.0;   // class 0

  const DetectionSet dets = decode(raw, 0.25, 0.7, cfg);
  REQUIRE(dets.size() == 1);
  // hand arithmetic: sigmoid(0.4), sigmoid(-0.2), exp(-0.3), exp(-0.5)
  CHECK(dets[0].box.cx == doctest::Approx(0.598687660112452).epsilon(1e-12));
  CHECK(dets[0].box.cy == doctest::Approx(0.450166002687522).epsilon(1e-12));
  CHECK(dets[0].box.w == doctest::Approx(0.740818220681718).epsilon(1e-12));
  CHECK(dets[0].box.h == doctest::Approx(0.606530659712633).epsilon(1e-12));
  CHECK(dets[0].confidence ==
        doctest::Approx((1.0 / (1.0 + std::exp(-3.0))) * (1.0 / (1.0 + std::exp(-2.0))))
            .epsilon(1e-12));
  CHECK(dets[0].class_id == 0);
}

TEST_CASE("decode is monotone in the confidence threshold") {
  const DetectorConfig cfg = small_cfg(2);
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<Tensor, kScaleCount> raw;
    for (int s = 0; s < kScaleCount; ++s)
      raw[s] = oracles::random_tensor({cfg.head_channels(), cfg.grid(s), cfg.grid(s)}, rng, -3.0,
                                      3.0);
    std::size_t prev = decode(raw, 0.05, 0.7, cfg).size();
    for (double thr : {0.2, 0.4, 0.6, 0.9}) {
      const std::size_t count = decode(raw, thr, 0.7, cfg).size();
      CHECK(count <= prev);
      prev = count;
    }
  }
}

TEST_CASE("scale assignment sends larger boxes to coarser scales") {
  DetectorConfig cfg;  // default 160px, strides 8/16/32
  cfg.class_count = 1;
  CHECK(assign_scale({0.5, 0.5, 0.15, 0.15}, cfg) == 0);  // 24px
  CHECK(assign_scale({0.5, 0.5, 0.4, 0.4}, cfg) == 1);    // 64px
  CHECK(assign_scale({0.5, 0.5, 0.85, 0.85}, cfg) == 2);  // 136px
}

TEST_CASE("encode/decode round trip recovers ground truth boxes") {
  const DetectorConfig cfg = small_cfg(3);
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Box b;
    b.w = 0.1 + 0.7 * u(rng);
    b.h = 0.1 + 0.7 * u(rng);
    b.cx = b.w / 2 + (1 - b.w) * u(rng);
    b.cy = b.h / 2 + (1 - b.h) * u(rng);
    Detection d;
    d.class_id = static_cast<int>(3 * u(rng));
    d.box = b;

    auto raw = empty_raw(cfg, -30.0);
    write_perfect(raw, d, cfg);
    const DetectionSet decoded = decode(raw, 0.25, 0.7, cfg);
    REQUIRE(decoded.size() == 1);
    CHECK(decoded[0].class_id == d.class_id);
    CHECK(iou(decoded[0].box, b) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("supervised_loss: empty truth with suppressed objectness is near zero") {
  const DetectorConfig cfg = small_cfg(2);
  const auto raw = empty_raw(cfg, -30.0);
  CHECK(supervised_loss(as_vars(raw), {}, cfg)->value[0] < 1e-3);
}

TEST_CASE("supervised_loss: exact target predictions score near zero") {
  const DetectorConfig cfg = small_cfg(2);
  Detection d;
  d.class_id = 1;
  d.box = {0.53, 0.41, 0.3, 0.25};

  auto raw = empty_raw(cfg, -30.0);
  write_perfect(raw, d, cfg);
  CHECK(supervised_loss(as_vars(raw), {d}, cfg)->value[0] < 1e-3);

  // Perturbing the predicted log-size raises the loss well above zero.
  const int s = assign_scale(d.box, cfg);
  const auto targets = encode_targets({d}, cfg);
  auto worse = raw;
  const int g = cfg.grid(s);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      if (targets[s].obj[static_cast<std::int64_t>(i) * g + j] != 0.0)
        worse[s].at(2, i, j) += 1.0;
  CHECK(supervised_loss(as_vars(worse), {d}, cfg)->value[0] > 0.3);
}

TEST_CASE("supervised_loss gradient matches finite differences on random parameters") {
  const DetectorConfig cfg = small_cfg(2);
  Detector det(cfg, 77);
  std::mt19937_64 rng(55);
  const Tensor img = oracles::random_tensor({1, 1, 32, 32}, rng, 0.0, 1.0);
  Detection d;
  d.class_id = 0;
  d.box = {0.45, 0.55, 0.4, 0.3};

  auto loss_value = [&]() {
    nn::NoGradGuard guard;
    BatchOutput out = det.forward(nn::constant(img));
    std::array<Var, kScaleCount> per_image = {nn::select_item(out.raw[0], 0),
                                              nn::select_item(out.raw[1], 0),
                                              nn::select_item(out.raw[2], 0)};
    return supervised_loss(per_image, {d}, cfg)->value[0];
  };

  BatchOutput out = det.forward(nn::constant(img));
  std::array<Var, kScaleCount> per_image = {nn::select_item(out.raw[0], 0),
                                            nn::select_item(out.raw[1], 0),
                                            nn::select_item(out.raw[2], 0)};
  nn::backward(supervised_loss(per_image, {d}, cfg));

  auto params = det.parameters();
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  int checked = 0;
  while (checked < 5) {
    auto& p = params[pick(rng)];
    if (p->grad.empty()) continue;
    std::uniform_int_distribution<std::int64_t> elem(0, p->value.size() - 1);
    const std::int64_t i = elem(rng);
    if (std::abs(p->grad[i]) < 1e-4) continue;
    const double saved = p->value[i];
    p->value[i] = saved + 1e-3;
    const double hi = loss_value();
    p->value[i] = saved - 1e-3;
    const double lo = loss_value();
    p->value[i] = saved;
    const double fd = (hi - lo) / 2e-3;
    CHECK(oracles::rel_err(p->grad[i], fd) < 1e-2);
    ++checked;
  }
}

TEST_CASE("a 50-step overfit cuts the loss below 10% of its start") {
  SceneSpec spec;
  spec.seed = 99;
  spec.classes = {TerrainKind::Crater};
  spec.min_objects = 1;
  spec.max_objects = 1;
  const LabeledImage scene = render(spec, 32);
  REQUIRE(scene.truth.size() == 1);

  const DetectorConfig cfg = small_cfg(1);
  Detector det(cfg, 7);
  nn::SgdMomentum opt(det.parameters(), 0.9, 10.0);
  const Tensor batch = scene.image.reshaped({1, 1, 32, 32});

  double initial = -1, last = -1;
  for (int step = 0; step < 50; ++step) {
    BatchOutput out = det.forward(nn::constant(batch));
    Var loss = supervised_loss_batch(out.raw, {scene.truth}, cfg);
    if (step == 0) initial = loss->value[0];
    last = loss->value[0];
    nn::backward(loss);
    opt.step(0.02);
    opt.zero_grad();
  }
  CHECK(last < 0.1 * initial);
}
