#include "uda/detector/loss.hpp"

#include <stdexcept>

namespace uda {

using nn::Var;

Var supervised_loss(const std::array<Var, kScaleCount>& raw, const DetectionSet& truth,
                    const DetectorConfig& cfg) {
  const auto targets = encode_targets(truth, cfg);
  Var total = nn::constant(nn::Tensor::scalar(0.0));
  for (int s = 0; s < kScaleCount; ++s) {
    const Var& r = raw[static_cast<std::size_t>(s)];
    const int g = cfg.grid(s);
    if (r->value.rank() != 3 || r->value.dim(0) != cfg.head_channels() ||
        r->value.dim(1) != g || r->value.dim(2) != g)
      throw std::invalid_argument("supervised_loss: prediction grid shape mismatch");
    const auto& t = targets[static_cast<std::size_t>(s)];

    std::vector<int> box_idx = {0, 1, 2, 3};
    Var box_pred = nn::gather_channels(r, box_idx);
    // Center offsets are sigmoid-bounded; log-size channels stay raw.
    Var cxy = nn::sigmoid(nn::gather_channels(box_pred, {0, 1}));
    Var cwh = nn::gather_channels(box_pred, {2, 3});
    nn::Tensor t_xy({2, g, g}), t_wh({2, g, g}), m_xy({2, g, g}), m_wh({2, g, g});
    for (int k = 0; k < 2; ++k)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(g) * g; ++i) {
        t_xy[k * static_cast<std::int64_t>(g) * g + i] = t.box[k * static_cast<std::int64_t>(g) * g + i];
        t_wh[k * static_cast<std::int64_t>(g) * g + i] =
            t.box[(k + 2) * static_cast<std::int64_t>(g) * g + i];
        m_xy[k * static_cast<std::int64_t>(g) * g + i] =
            t.box_mask[k * static_cast<std::int64_t>(g) * g + i];
        m_wh[k * static_cast<std::int64_t>(g) * g + i] =
            t.box_mask[(k + 2) * static_cast<std::int64_t>(g) * g + i];
      }
    Var box_loss = nn::add(nn::masked_smooth_l1_sum(cxy, t_xy, m_xy, 1.0),
                           nn::masked_smooth_l1_sum(cwh, t_wh, m_wh, 1.0));

    Var obj_pred = nn::reshape(nn::gather_channels(r, {4}), {g, g});
    Var obj_loss = nn::bce_with_logits_sum(obj_pred, t.obj);

    std::vector<int> cls_idx(static_cast<std::size_t>(cfg.class_count));
    for (int c = 0; c < cfg.class_count; ++c) cls_idx[static_cast<std::size_t>(c)] = 5 + c;
    Var cls_pred = nn::gather_channels(r, cls_idx);
    Var cls_loss = nn::sum(nn::mul_const(nn::bce_with_logits_elems(cls_pred, t.cls), t.cls_mask));

    total = nn::add(total, nn::add(box_loss, nn::add(obj_loss, cls_loss)));
  }
  return total;
}

Var supervised_loss_batch(const std::array<Var, kScaleCount>& raw,
                          const std::vector<DetectionSet>& truth, const DetectorConfig& cfg) {
  const int n = raw[0]->value.dim(0);
  if (static_cast<std::size_t>(n) != truth.size())
    throw std::invalid_argument("supervised_loss_batch: batch size mismatch");
  Var total = nn::constant(nn::Tensor::scalar(0.0));
  for (int i = 0; i < n; ++i) {
    std::array<Var, kScaleCount> per_image;
    for (int s = 0; s < kScaleCount; ++s)
      per_image[static_cast<std::size_t>(s)] =
          nn::select_item(raw[static_cast<std::size_t>(s)], i);
    total = nn::add(total, supervised_loss(per_image, truth[static_cast<std::size_t>(i)], cfg));
  }
  return nn::scale(total, 1.0 / n);
}

}  // namespace uda
