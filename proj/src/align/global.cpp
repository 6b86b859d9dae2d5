#include "uda/align/global.hpp"

#include <stdexcept>

namespace uda {

using nn::Var;

Var adv_loss(const nn::Var& logit, int d) {
  if (d != 0 && d != 1) throw std::invalid_argument("adv_loss: domain label must be 0 or 1");
  nn::Tensor target = nn::Tensor::full(logit->value.shape(), static_cast<double>(d));
  return nn::scale(nn::bce_with_logits_sum(logit, target),
                   1.0 / static_cast<double>(logit->value.size()));
}

Var img_loss(const Var& fs, const Var& ft, const ConvDiscriminator& disc, double lambda,
             AlignCounters* counters) {
  if (!fs->value.same_shape(ft->value))
    throw std::invalid_argument("img_loss: source/target feature shapes differ");
  if (counters) {
    counters->grl_calls += 2;
    counters->disc_global_calls += 2;
  }
  Var ls = adv_loss(disc.logits(nn::grl(fs, lambda)), 0);
  Var lt = adv_loss(disc.logits(nn::grl(ft, lambda)), 1);
  return nn::add(ls, lt);
}

}  // namespace uda
