#include "uda/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace uda::nn {

SgdMomentum::SgdMomentum(std::vector<Var> params, double momentum, double clip_norm)
    : params_(std::move(params)), momentum_(momentum), clip_norm_(clip_norm) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(Tensor::zeros(p->value.shape()));
}

void SgdMomentum::step(double lr) {
  double norm2 = 0;
  for (const auto& p : params_) {
    if (p->grad.empty()) continue;
    for (std::int64_t i = 0; i < p->grad.size(); ++i) norm2 += p->grad[i] * p->grad[i];
  }
  last_grad_norm_ = std::sqrt(norm2);
  double factor = 1.0;
  if (clip_norm_ > 0 && last_grad_norm_ > clip_norm_) factor = clip_norm_ / last_grad_norm_;

  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (p->grad.empty()) continue;
    Tensor& v = velocity_[k];
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      v[i] = momentum_ * v[i] + factor * p->grad[i];
      p->value[i] -= lr * v[i];
    }
  }
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p->grad = Tensor();
}

double cosine_lr(double lr0, double floor_ratio, std::int64_t step, std::int64_t total) {
  if (total <= 1) return lr0;
  const double t = std::min<double>(1.0, static_cast<double>(step) / static_cast<double>(total - 1));
  const double lo = lr0 * floor_ratio;
  return lo + 0.5 * (lr0 - lo) * (1.0 + std::cos(t * 3.14159265358979323846));
}

Tensor he_normal(std::vector<int> shape, std::int64_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace uda::nn
