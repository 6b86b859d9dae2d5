#pragma once

#include <vector>

#include "uda/nn/autograd.hpp"

namespace uda::nn {

// ---- elementwise -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var rsub_scalar(double s, const Var& a);  // s - a
Var scale(const Var& a, double s);
Var mul_const(const Var& a, Tensor c);
Var square(const Var& a);
Var abs_val(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var log_val(const Var& a);
Var clamp_min(const Var& a, double lo);

// ---- reductions ------------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
/// sum(c ⊙ a) for a constant weight tensor c (same shape as a).
Var weighted_sum(const Var& a, Tensor c);

// ---- shape -----------------------------------------------------------------
Var reshape(const Var& a, std::vector<int> shape);
/// k tensors of identical shape [C,...] stacked into [k,C,...].
Var stack_items(const std::vector<Var>& items);
/// (N,C,H,W) -> (C,H,W) for one batch element.
Var select_item(const Var& a, int n);
/// (C,H,W) -> (K,H,W), rows picked by idx (duplicates allowed).
Var gather_channels(const Var& a, std::vector<int> idx);
/// Elementwise mean over a list of same-shape vars.
Var mean_items(const std::vector<Var>& items);

// ---- neural primitives -----------------------------------------------------
/// 2-D convolution, NCHW layout. x:[N,Ci,H,W] w:[Co,Ci,kh,kw] b:[Co].
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
/// Same-padded 1-D convolution over a vector. x:[C] w:[k] (k odd) b:[1].
Var conv1d_same(const Var& x, const Var& w, const Var& b);
/// y = W x + b. x:[n] -> [m], or batched x:[N,n] -> [N,m]. w:[m,n] b:[m].
Var linear(const Var& x, const Var& w, const Var& b);
/// Spatial mean: (N,C,H,W) -> (N,C) or (C,H,W) -> (C).
Var gap_spatial(const Var& a);
/// Nearest-neighbour 2x upsample of (N,C,H,W).
Var upsample2x(const Var& a);
/// Identity forward; backward multiplies the incoming gradient by -lambda.
Var grl(const Var& a, double lambda);

/// Per-channel scaling of (C,H,W) by a weight vector [C].
Var mul_cvec(const Var& x, const Var& w);
/// (K,H,W) -> (1,H,W) channel mean.
Var mean_over_channels(const Var& x);

/// Average of the region [x0,x1]x[y0,y1] (continuous feature coordinates,
/// y down, x right) of batch element n, split into a PxP grid of bins. Each
/// output bin is the exact area-weighted mean of the cells it covers.
/// x: (N,C,H,W) -> (C,P,P).
Var region_pool(const Var& x, int n, double x0, double y0, double x1, double y1, int P);

/// Pixel-wise top-k attention pooling: at every pixel the k largest values of
/// w[c]*x[c,h,w] are averaged (ties broken toward lower channel index).
/// x:[C,H,W], w:[C] -> [1,H,W].
Var ptap(const Var& x, const Var& w, int k);

/// Unit L2 normalization of a vector (zero vectors pass through unchanged).
Var l2_normalize(const Var& x);

/// Sum of smooth-L1(pred - target) over entries where mask is nonzero.
Var masked_smooth_l1_sum(const Var& pred, Tensor target, Tensor mask, double beta);

/// Elementwise binary cross-entropy on logits with probabilities clamped to
/// [1e-7, 1-1e-7]; composed from primitive ops so gradients are exact.
Var bce_with_logits_elems(const Var& logits, const Tensor& targets);
Var bce_with_logits_sum(const Var& logits, const Tensor& targets);

/// ||a-b||^2 as a scalar var.
Var squared_distance(const Var& a, const Var& b);

}  // namespace uda::nn
