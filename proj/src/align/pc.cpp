#include "uda/align/pc.hpp"

#include <stdexcept>

namespace uda {

using nn::Var;

Var pc_loss(const std::array<Var, kScaleCount>& fs, const std::array<Var, kScaleCount>& ft,
            bool normalize) {
  Var total = nn::constant(nn::Tensor::scalar(0.0));
  for (int i = 0; i < kScaleCount; ++i) {
    const Var& a = fs[static_cast<std::size_t>(i)];
    const Var& b = ft[static_cast<std::size_t>(i)];
    if (!a->value.same_shape(b->value))
      throw std::invalid_argument("pc_loss: scale-wise shapes differ");
    Var l1 = nn::sum(nn::abs_val(nn::sub(a, b)));
    double factor = 1.0 / kPcWeights[static_cast<std::size_t>(i)];
    if (normalize) factor /= static_cast<double>(a->value.size());
    total = nn::add(total, nn::scale(l1, factor));
  }
  return total;
}

double pc_loss_value(const ScaleSet& fs, const ScaleSet& ft, bool normalize) {
  nn::NoGradGuard no_grad;
  std::array<Var, kScaleCount> a, b;
  for (int i = 0; i < kScaleCount; ++i) {
    a[static_cast<std::size_t>(i)] = nn::constant(fs.maps[static_cast<std::size_t>(i)].data);
    b[static_cast<std::size_t>(i)] = nn::constant(ft.maps[static_cast<std::size_t>(i)].data);
  }
  return pc_loss(a, b, normalize)->value[0];
}

}  // namespace uda
