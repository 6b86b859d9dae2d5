#include "uda/detector/model.hpp"

#include <stdexcept>

#include "uda/nn/optim.hpp"

namespace uda {

using nn::Var;

Detector::Conv Detector::make_conv(int out_ch, int in_ch, int k, std::mt19937_64& rng) {
  Conv c;
  c.w = nn::parameter(nn::he_normal({out_ch, in_ch, k, k},
                                    static_cast<std::int64_t>(in_ch) * k * k, rng));
  c.b = nn::parameter(nn::Tensor::zeros({out_ch}));
  return c;
}

Detector::Detector(DetectorConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int cb = cfg_.backbone_channels;
  const int c1 = std::max(4, cb / 4);
  const int c2 = std::max(4, cb / 2);
  const int nl = cfg_.neck_channels[0];
  const int nm = cfg_.neck_channels[1];
  const int ns = cfg_.neck_channels[2];

  b1_ = make_conv(c1, 1, 3, rng);
  b2_ = make_conv(c2, c1, 3, rng);
  b3_ = make_conv(cb, c2, 3, rng);
  down_m_ = make_conv(nm, cb, 3, rng);
  down_s_ = make_conv(ns, nm, 3, rng);
  lat_l_ = make_conv(nl, cb, 1, rng);
  lat_m_ = make_conv(nm, nm, 1, rng);
  lat_s_ = make_conv(ns, ns, 1, rng);
  td_sm_ = make_conv(nm, ns, 1, rng);  // small -> medium adapter
  td_ml_ = make_conv(nl, nm, 1, rng);  // medium -> large adapter
  for (int i = 0; i < kScaleCount; ++i)
    heads_[i] = make_conv(cfg_.head_channels(), cfg_.neck_channels[static_cast<std::size_t>(i)],
                          1, rng);
}

BatchOutput Detector::forward(const nn::Var& images) const {
  if (images->value.rank() != 4 || images->value.dim(1) != 1 ||
      images->value.dim(2) != cfg_.input_size || images->value.dim(3) != cfg_.input_size)
    throw std::invalid_argument("Detector::forward: expected [N,1,S,S] input at configured size");

  constexpr double kSlope = 0.1;
  auto block = [&](const Var& x, const Conv& c, int stride) {
    return nn::leaky_relu(nn::conv2d(x, c.w, c.b, stride, stride == 2 ? 1 : 0), kSlope);
  };

  BatchOutput out;
  Var x = block(images, b1_, 2);
  x = block(x, b2_, 2);
  out.global = block(x, b3_, 2);

  Var trunk_m = block(out.global, down_m_, 2);
  Var trunk_s = block(trunk_m, down_s_, 2);

  // Top-down merge: coarse features are upsampled, channel-adapted, and added
  // to the lateral projection of the finer trunk level.
  Var p_s = nn::leaky_relu(nn::conv2d(trunk_s, lat_s_.w, lat_s_.b, 1, 0), kSlope);
  Var up_m = nn::conv2d(nn::upsample2x(p_s), td_sm_.w, td_sm_.b, 1, 0);
  Var p_m = nn::leaky_relu(nn::add(nn::conv2d(trunk_m, lat_m_.w, lat_m_.b, 1, 0), up_m), kSlope);
  Var up_l = nn::conv2d(nn::upsample2x(p_m), td_ml_.w, td_ml_.b, 1, 0);
  Var p_l =
      nn::leaky_relu(nn::add(nn::conv2d(out.global, lat_l_.w, lat_l_.b, 1, 0), up_l), kSlope);

  out.inst = {p_l, p_m, p_s};
  for (int i = 0; i < kScaleCount; ++i)
    out.raw[static_cast<std::size_t>(i)] =
        nn::conv2d(out.inst[static_cast<std::size_t>(i)], heads_[static_cast<std::size_t>(i)].w,
                   heads_[static_cast<std::size_t>(i)].b, 1, 0);
  return out;
}

DetectorOutput Detector::forward_image(const nn::Tensor& image) const {
  if (image.rank() != 2 || image.dim(0) != cfg_.input_size || image.dim(1) != cfg_.input_size)
    throw std::invalid_argument("Detector::forward_image: image size mismatch");

  nn::NoGradGuard no_grad;
  nn::Tensor batched = image.reshaped({1, 1, cfg_.input_size, cfg_.input_size});
  BatchOutput b = forward(nn::constant(std::move(batched)));

  DetectorOutput out;
  const auto& g = b.global->value;
  out.global_features.data = g.reshaped({g.dim(1), g.dim(2), g.dim(3)});
  out.global_features.scale_tag = ScaleTag::Large;
  for (int i = 0; i < kScaleCount; ++i) {
    const auto& f = b.inst[static_cast<std::size_t>(i)]->value;
    out.instance_features.maps[static_cast<std::size_t>(i)].data =
        f.reshaped({f.dim(1), f.dim(2), f.dim(3)});
    out.instance_features.maps[static_cast<std::size_t>(i)].scale_tag = static_cast<ScaleTag>(i);
    const auto& r = b.raw[static_cast<std::size_t>(i)]->value;
    out.raw_predictions[static_cast<std::size_t>(i)] = r.reshaped({r.dim(1), r.dim(2), r.dim(3)});
  }
  out.instance_features.validate();
  return out;
}

std::vector<nn::Var> Detector::parameters() const {
  std::vector<Var> out;
  for (const Conv* c : {&b1_, &b2_, &b3_, &down_m_, &down_s_, &lat_l_, &lat_m_, &lat_s_, &td_sm_,
                        &td_ml_, &heads_[0], &heads_[1], &heads_[2]}) {
    out.push_back(c->w);
    out.push_back(c->b);
  }
  return out;
}

std::vector<nn::Var> Detector::backbone_parameters() const {
  std::vector<Var> out;
  for (const Conv* c : {&b1_, &b2_, &b3_}) {
    out.push_back(c->w);
    out.push_back(c->b);
  }
  return out;
}

void Detector::collect_parameters(const std::string& prefix,
                                  std::map<std::string, nn::Var>& out) const {
  const std::pair<const char*, const Conv*> named[] = {
      {"b1", &b1_},     {"b2", &b2_},     {"b3", &b3_},     {"down_m", &down_m_},
      {"down_s", &down_s_}, {"lat_l", &lat_l_}, {"lat_m", &lat_m_}, {"lat_s", &lat_s_},
      {"td_sm", &td_sm_},   {"td_ml", &td_ml_}, {"head_l", &heads_[0]}, {"head_m", &heads_[1]},
      {"head_s", &heads_[2]}};
  for (const auto& [name, conv] : named) {
    out[prefix + "." + name + ".w"] = conv->w;
    out[prefix + "." + name + ".b"] = conv->b;
  }
}

}  // namespace uda
