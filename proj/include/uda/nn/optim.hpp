#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "uda/nn/autograd.hpp"

namespace uda::nn {

/// SGD with classical momentum and optional global-norm gradient clipping
/// (clip_norm <= 0 disables clipping).
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Var> params, double momentum, double clip_norm);

  void step(double lr);
  void zero_grad();

  double last_grad_norm() const { return last_grad_norm_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> velocity_;
  double momentum_;
  double clip_norm_;
  double last_grad_norm_ = 0.0;
};

/// lr(t) on a half-cosine from lr0 down to floor_ratio*lr0 over total steps.
double cosine_lr(double lr0, double floor_ratio, std::int64_t step, std::int64_t total);

/// Kaiming-normal initialization: stddev sqrt(2/fan_in).
Tensor he_normal(std::vector<int> shape, std::int64_t fan_in, std::mt19937_64& rng);

}  // namespace uda::nn
