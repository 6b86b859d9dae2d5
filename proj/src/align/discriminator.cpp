#include "uda/align/discriminator.hpp"

#include <stdexcept>

#include "uda/nn/optim.hpp"

namespace uda {

using nn::Var;

ConvDiscriminator::ConvDiscriminator(int in_channels, std::uint64_t seed, int hidden)
    : in_channels_(in_channels) {
  std::mt19937_64 rng(seed);
  c1w_ = nn::parameter(nn::he_normal({hidden, in_channels, 3, 3},
                                     static_cast<std::int64_t>(in_channels) * 9, rng));
  c1b_ = nn::parameter(nn::Tensor::zeros({hidden}));
  c2w_ = nn::parameter(
      nn::he_normal({2 * hidden, hidden, 3, 3}, static_cast<std::int64_t>(hidden) * 9, rng));
  c2b_ = nn::parameter(nn::Tensor::zeros({2 * hidden}));
  lw_ = nn::parameter(nn::he_normal({1, 2 * hidden}, 2 * hidden, rng));
  lb_ = nn::parameter(nn::Tensor::zeros({1}));
}

Var ConvDiscriminator::logits(const Var& x) const {
  constexpr double kSlope = 0.1;
  Var in = x;
  const bool batched = x->value.rank() == 4;
  if (!batched) {
    const auto& sh = x->value.shape();
    in = nn::reshape(x, {1, sh[0], sh[1], sh[2]});
  }
  if (in->value.dim(1) != in_channels_)
    throw std::invalid_argument("ConvDiscriminator: channel count mismatch");
  Var h = nn::leaky_relu(nn::conv2d(in, c1w_, c1b_, 2, 1), kSlope);
  h = nn::leaky_relu(nn::conv2d(h, c2w_, c2b_, 2, 1), kSlope);
  Var pooled = nn::gap_spatial(h);                 // [N, 2*hidden]
  Var out = nn::linear(pooled, lw_, lb_);          // [N, 1]
  return nn::reshape(out, {pooled->value.dim(0)});
}

std::vector<Var> ConvDiscriminator::parameters() const {
  return {c1w_, c1b_, c2w_, c2b_, lw_, lb_};
}

void ConvDiscriminator::collect_parameters(const std::string& prefix,
                                           std::map<std::string, nn::Var>& out) const {
  out[prefix + ".c1.w"] = c1w_;
  out[prefix + ".c1.b"] = c1b_;
  out[prefix + ".c2.w"] = c2w_;
  out[prefix + ".c2.b"] = c2b_;
  out[prefix + ".l.w"] = lw_;
  out[prefix + ".l.b"] = lb_;
}

VectorDiscriminator::VectorDiscriminator(int in_dim, std::uint64_t seed, int hidden)
    : in_dim_(in_dim) {
  std::mt19937_64 rng(seed);
  w1_ = nn::parameter(nn::he_normal({hidden, in_dim}, in_dim, rng));
  b1_ = nn::parameter(nn::Tensor::zeros({hidden}));
  w2_ = nn::parameter(nn::he_normal({1, hidden}, hidden, rng));
  b2_ = nn::parameter(nn::Tensor::zeros({1}));
}

Var VectorDiscriminator::logit(const Var& x) const {
  if (x->value.rank() != 1 || x->value.size() != in_dim_)
    throw std::invalid_argument("VectorDiscriminator: dimension mismatch");
  Var h = nn::leaky_relu(nn::linear(x, w1_, b1_), 0.1);
  return nn::linear(h, w2_, b2_);
}

std::vector<Var> VectorDiscriminator::parameters() const { return {w1_, b1_, w2_, b2_}; }

void VectorDiscriminator::collect_parameters(const std::string& prefix,
                                             std::map<std::string, nn::Var>& out) const {
  out[prefix + ".l1.w"] = w1_;
  out[prefix + ".l1.b"] = b1_;
  out[prefix + ".l2.w"] = w2_;
  out[prefix + ".l2.b"] = b2_;
}

}  // namespace uda
