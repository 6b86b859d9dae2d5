#include "uda/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uda::nn {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Var unary(const Var& a, Tensor out, std::function<void(Node&)> fn) {
  return make_node(std::move(out), {a}, std::move(fn));
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  assert(a->value.same_shape(b->value));
  Tensor out = a->value;
  add_into(out, b->value);
  return make_node(std::move(out), {a, b}, [](Node& n) {
    for (int i = 0; i < 2; ++i)
      if (n.parents[i]->needs_grad) add_into(n.parents[i]->ensure_grad(), n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  assert(a->value.same_shape(b->value));
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    if (n.parents[0]->needs_grad) add_into(n.parents[0]->ensure_grad(), n.grad);
    if (n.parents[1]->needs_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  assert(a->value.same_shape(b->value));
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->needs_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parents[1]->needs_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += s;
  return unary(a, std::move(out), [](Node& n) {
    if (n.parents[0]->needs_grad) add_into(n.parents[0]->ensure_grad(), n.grad);
  });
}

Var rsub_scalar(double s, const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = s - out[i];
  return unary(a, std::move(out), [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return unary(a, std::move(out), [s](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

Var mul_const(const Var& a, Tensor c) {
  assert(a->value.same_shape(c));
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  return unary(a, std::move(out), [c = std::move(c)](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * c[i];
  });
}

Var square(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= out[i];
  return unary(a, std::move(out), [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& x = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * n.grad[i];
  });
}

Var abs_val(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::abs(out[i]);
  return unary(a, std::move(out), [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& x = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i)
      g[i] += (x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0)) * n.grad[i];
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0) out[i] *= slope;
  return unary(a, std::move(out), [slope](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& x = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i)
      g[i] += (x[i] >= 0 ? 1.0 : slope) * n.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
  Tensor saved = out;
  return unary(a, std::move(out), [saved = std::move(saved)](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i)
      g[i] += saved[i] * (1.0 - saved[i]) * n.grad[i];
  });
}

Var log_val(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return unary(a, std::move(out), [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& x = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / x[i];
  });
}

Var clamp_min(const Var& a, double lo) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], lo);
  return unary(a, std::move(out), [lo](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& x = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (x[i] > lo) g[i] += n.grad[i];
  });
}

// ---- reductions ------------------------------------------------------------

Var sum(const Var& a) {
  double s = 0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return unary(a, Tensor::scalar(s), [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const double gv = n.grad[0];
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a->value.size())); }

Var weighted_sum(const Var& a, Tensor c) {
  assert(a->value.same_shape(c));
  double s = 0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i] * c[i];
  return unary(a, Tensor::scalar(s), [c = std::move(c)](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const double gv = n.grad[0];
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += gv * c[i];
  });
}

// ---- shape -----------------------------------------------------------------

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a->value.reshaped(std::move(shape));
  return unary(a, std::move(out), [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    add_into(n.parents[0]->ensure_grad(), n.grad);
  });
}

Var stack_items(const std::vector<Var>& items) {
  assert(!items.empty());
  const Tensor& first = items[0]->value;
  std::vector<int> shape;
  shape.push_back(static_cast<int>(items.size()));
  for (int d : first.shape()) shape.push_back(d);
  Tensor out(shape);
  const std::int64_t stride = first.size();
  for (std::size_t k = 0; k < items.size(); ++k) {
    assert(items[k]->value.same_shape(first));
    std::copy_n(items[k]->value.data(), stride, out.data() + stride * static_cast<std::int64_t>(k));
  }
  std::vector<Var> parents(items.begin(), items.end());
  return make_node(std::move(out), std::move(parents), [stride](Node& n) {
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      if (!n.parents[k]->needs_grad) continue;
      Tensor& g = n.parents[k]->ensure_grad();
      const double* src = n.grad.data() + stride * static_cast<std::int64_t>(k);
      for (std::int64_t i = 0; i < stride; ++i) g[i] += src[i];
    }
  });
}

Var select_item(const Var& a, int n_idx) {
  assert(a->value.rank() == 4);
  const auto& sh = a->value.shape();
  const std::int64_t stride = static_cast<std::int64_t>(sh[1]) * sh[2] * sh[3];
  Tensor out({sh[1], sh[2], sh[3]});
  std::copy_n(a->value.data() + stride * n_idx, stride, out.data());
  return unary(a, std::move(out), [stride, n_idx](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    double* dst = g.data() + stride * n_idx;
    for (std::int64_t i = 0; i < stride; ++i) dst[i] += n.grad[i];
  });
}

Var gather_channels(const Var& a, std::vector<int> idx) {
  assert(a->value.rank() == 3);
  const auto& sh = a->value.shape();
  const std::int64_t plane = static_cast<std::int64_t>(sh[1]) * sh[2];
  Tensor out({static_cast<int>(idx.size()), sh[1], sh[2]});
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(a->value.data() + plane * idx[k], plane,
                out.data() + plane * static_cast<std::int64_t>(k));
  return unary(a, std::move(out), [plane, idx = std::move(idx)](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double* dst = g.data() + plane * idx[k];
      const double* src = n.grad.data() + plane * static_cast<std::int64_t>(k);
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  });
}

Var mean_items(const std::vector<Var>& items) {
  assert(!items.empty());
  Tensor out = items[0]->value;
  for (std::size_t k = 1; k < items.size(); ++k) add_into(out, items[k]->value);
  const double inv = 1.0 / static_cast<double>(items.size());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= inv;
  std::vector<Var> parents(items.begin(), items.end());
  return make_node(std::move(out), std::move(parents), [inv](Node& n) {
    for (auto& p : n.parents) {
      if (!p->needs_grad) continue;
      Tensor& g = p->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += inv * n.grad[i];
    }
  });
}

// ---- convolution -----------------------------------------------------------

namespace {

struct ConvDims {
  int n, ci, h, w, co, kh, kw, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  ConvDims d{};
  d.n = x.dim(0);
  d.ci = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.co = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  return d;
}

// col is [ci*kh*kw, ho*wo] row-major for one sample.
void im2col(const double* x, const ConvDims& d, int stride, int pad, double* col) {
  const int hw = d.ho * d.wo;
  for (int c = 0; c < d.ci; ++c) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        double* row = col + ((c * d.kh + ky) * d.kw + kx) * static_cast<std::int64_t>(hw);
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            row[oy * d.wo + ox] = (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                                      ? x[(c * d.h + iy) * static_cast<std::int64_t>(d.w) + ix]
                                      : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvDims& d, int stride, int pad, double* x) {
  for (int c = 0; c < d.ci; ++c) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* row =
            col + ((c * d.kh + ky) * d.kw + kx) * static_cast<std::int64_t>(d.ho * d.wo);
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= d.h) continue;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= d.w) continue;
            x[(c * d.h + iy) * static_cast<std::int64_t>(d.w) + ix] += row[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  assert(x->value.rank() == 4 && w->value.rank() == 4);
  assert(x->value.dim(1) == w->value.dim(1));
  assert(b->value.size() == w->value.dim(0));
  const ConvDims d = conv_dims(x->value, w->value, stride, pad);
  if (d.ho <= 0 || d.wo <= 0) throw std::invalid_argument("conv2d: empty output");

  const std::int64_t col_rows = static_cast<std::int64_t>(d.ci) * d.kh * d.kw;
  const std::int64_t col_cols = static_cast<std::int64_t>(d.ho) * d.wo;
  const std::int64_t in_stride = static_cast<std::int64_t>(d.ci) * d.h * d.w;
  const std::int64_t out_stride = static_cast<std::int64_t>(d.co) * col_cols;

  Tensor out({d.n, d.co, d.ho, d.wo});
  std::vector<double> col(static_cast<std::size_t>(col_rows * col_cols));
  ConstMatMap wm(w->value.data(), d.co, col_rows);
  for (int s = 0; s < d.n; ++s) {
    im2col(x->value.data() + s * in_stride, d, stride, pad, col.data());
    ConstMatMap cm(col.data(), col_rows, col_cols);
    MatMap om(out.data() + s * out_stride, d.co, col_cols);
    om.noalias() = wm * cm;
    for (int c = 0; c < d.co; ++c) om.row(c).array() += b->value[c];
  }

  return make_node(std::move(out), {x, w, b}, [d, stride, pad](Node& n) {
    const Var& xp = n.parents[0];
    const Var& wp = n.parents[1];
    const Var& bp = n.parents[2];
    const std::int64_t col_rows = static_cast<std::int64_t>(d.ci) * d.kh * d.kw;
    const std::int64_t col_cols = static_cast<std::int64_t>(d.ho) * d.wo;
    const std::int64_t in_stride = static_cast<std::int64_t>(d.ci) * d.h * d.w;
    const std::int64_t out_stride = static_cast<std::int64_t>(d.co) * col_cols;

    ConstMatMap wm(wp->value.data(), d.co, col_rows);
    std::vector<double> col(static_cast<std::size_t>(col_rows * col_cols));
    std::vector<double> dcol(static_cast<std::size_t>(col_rows * col_cols));

    Tensor* gx = xp->needs_grad ? &xp->ensure_grad() : nullptr;
    Tensor* gw = wp->needs_grad ? &wp->ensure_grad() : nullptr;
    Tensor* gb = bp->needs_grad ? &bp->ensure_grad() : nullptr;
    MatMap gwm(gw ? gw->data() : nullptr, gw ? d.co : 0, gw ? col_rows : 0);

    for (int s = 0; s < d.n; ++s) {
      ConstMatMap gom(n.grad.data() + s * out_stride, d.co, col_cols);
      if (gx) {
        MatMap dcm(dcol.data(), col_rows, col_cols);
        dcm.noalias() = wm.transpose() * gom;
        col2im_add(dcol.data(), d, stride, pad, gx->data() + s * in_stride);
      }
      if (gw) {
        im2col(xp->value.data() + s * in_stride, d, stride, pad, col.data());
        ConstMatMap cm(col.data(), col_rows, col_cols);
        gwm.noalias() += gom * cm.transpose();
      }
      if (gb)
        for (int c = 0; c < d.co; ++c) (*gb)[c] += gom.row(c).sum();
    }
  });
}

Var conv1d_same(const Var& x, const Var& w, const Var& b) {
  assert(x->value.rank() == 1 && w->value.rank() == 1 && b->value.size() == 1);
  const int c = static_cast<int>(x->value.size());
  const int k = static_cast<int>(w->value.size());
  assert(k % 2 == 1);
  const int half = k / 2;
  Tensor out({c});
  for (int i = 0; i < c; ++i) {
    double acc = b->value[0];
    for (int j = 0; j < k; ++j) {
      const int src = i + j - half;
      if (src >= 0 && src < c) acc += w->value[j] * x->value[src];
    }
    out[i] = acc;
  }
  return make_node(std::move(out), {x, w, b}, [c, k, half](Node& n) {
    const Var& xp = n.parents[0];
    const Var& wp = n.parents[1];
    const Var& bp = n.parents[2];
    for (int i = 0; i < c; ++i) {
      const double g = n.grad[i];
      if (bp->needs_grad) bp->ensure_grad()[0] += g;
      for (int j = 0; j < k; ++j) {
        const int src = i + j - half;
        if (src < 0 || src >= c) continue;
        if (wp->needs_grad) wp->ensure_grad()[j] += g * xp->value[src];
        if (xp->needs_grad) xp->ensure_grad()[src] += g * wp->value[j];
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  assert(w->value.rank() == 2);
  const int rank = x->value.rank();
  assert(rank == 1 || rank == 2);
  const int m = w->value.dim(0);
  const int in = w->value.dim(1);
  const int batch = rank == 2 ? x->value.dim(0) : 1;
  assert(x->value.dim(rank - 1) == in && b->value.size() == m);

  Tensor out(rank == 2 ? std::vector<int>{batch, m} : std::vector<int>{m});
  for (int s = 0; s < batch; ++s) {
    const double* xv = x->value.data() + static_cast<std::int64_t>(s) * in;
    double* ov = out.data() + static_cast<std::int64_t>(s) * m;
    for (int i = 0; i < m; ++i) {
      double acc = b->value[i];
      const double* row = w->value.data() + static_cast<std::int64_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * xv[j];
      ov[i] = acc;
    }
  }
  return make_node(std::move(out), {x, w, b}, [m, in, batch](Node& n) {
    const Var& xp = n.parents[0];
    const Var& wp = n.parents[1];
    const Var& bp = n.parents[2];
    for (int s = 0; s < batch; ++s) {
      const double* g = n.grad.data() + static_cast<std::int64_t>(s) * m;
      const double* xv = xp->value.data() + static_cast<std::int64_t>(s) * in;
      for (int i = 0; i < m; ++i) {
        if (bp->needs_grad) bp->ensure_grad()[i] += g[i];
        const double* row = wp->value.data() + static_cast<std::int64_t>(i) * in;
        for (int j = 0; j < in; ++j) {
          if (wp->needs_grad)
            wp->ensure_grad()[static_cast<std::int64_t>(i) * in + j] += g[i] * xv[j];
          if (xp->needs_grad)
            xp->ensure_grad()[static_cast<std::int64_t>(s) * in + j] += g[i] * row[j];
        }
      }
    }
  });
}

Var gap_spatial(const Var& a) {
  const int rank = a->value.rank();
  assert(rank == 3 || rank == 4);
  const bool batched = rank == 4;
  const int n = batched ? a->value.dim(0) : 1;
  const int c = a->value.dim(batched ? 1 : 0);
  const std::int64_t hw =
      static_cast<std::int64_t>(a->value.dim(batched ? 2 : 1)) * a->value.dim(batched ? 3 : 2);
  Tensor out(batched ? std::vector<int>{n, c} : std::vector<int>{c});
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
    const double* src = a->value.data() + p * hw;
    double acc = 0;
    for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
    out[p] = acc * inv;
  }
  return unary(a, std::move(out), [n, c, hw, inv](Node& node) {
    if (!node.parents[0]->needs_grad) return;
    Tensor& g = node.parents[0]->ensure_grad();
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
      const double gv = node.grad[p] * inv;
      double* dst = g.data() + p * hw;
      for (std::int64_t i = 0; i < hw; ++i) dst[i] += gv;
    }
  });
}

Var upsample2x(const Var& a) {
  assert(a->value.rank() == 4);
  const auto& sh = a->value.shape();
  const int n = sh[0], c = sh[1], h = sh[2], w = sh[3];
  Tensor out({n, c, 2 * h, 2 * w});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double v = a->value.at(s, ch, y, x);
          out.at(s, ch, 2 * y, 2 * x) = v;
          out.at(s, ch, 2 * y, 2 * x + 1) = v;
          out.at(s, ch, 2 * y + 1, 2 * x) = v;
          out.at(s, ch, 2 * y + 1, 2 * x + 1) = v;
        }
  return unary(a, std::move(out), [n, c, h, w](Node& node) {
    if (!node.parents[0]->needs_grad) return;
    Tensor& g = node.parents[0]->ensure_grad();
    for (int s = 0; s < n; ++s)
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            g.at(s, ch, y, x) += node.grad.at(s, ch, 2 * y, 2 * x) +
                                 node.grad.at(s, ch, 2 * y, 2 * x + 1) +
                                 node.grad.at(s, ch, 2 * y + 1, 2 * x) +
                                 node.grad.at(s, ch, 2 * y + 1, 2 * x + 1);
  });
}

Var grl(const Var& a, double lambda) {
  Tensor out = a->value;
  return unary(a, std::move(out), [lambda](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] -= lambda * n.grad[i];
  });
}

Var mul_cvec(const Var& x, const Var& w) {
  assert(x->value.rank() == 3 && w->value.rank() == 1);
  const auto& sh = x->value.shape();
  assert(w->value.size() == sh[0]);
  const std::int64_t plane = static_cast<std::int64_t>(sh[1]) * sh[2];
  Tensor out = x->value;
  for (int c = 0; c < sh[0]; ++c) {
    double* dst = out.data() + plane * c;
    const double wv = w->value[c];
    for (std::int64_t i = 0; i < plane; ++i) dst[i] *= wv;
  }
  return make_node(std::move(out), {x, w}, [plane, channels = sh[0]](Node& n) {
    const Var& xp = n.parents[0];
    const Var& wp = n.parents[1];
    for (int c = 0; c < channels; ++c) {
      const double* g = n.grad.data() + plane * c;
      if (xp->needs_grad) {
        double* dst = xp->ensure_grad().data() + plane * c;
        const double wv = wp->value[c];
        for (std::int64_t i = 0; i < plane; ++i) dst[i] += g[i] * wv;
      }
      if (wp->needs_grad) {
        const double* xv = xp->value.data() + plane * c;
        double acc = 0;
        for (std::int64_t i = 0; i < plane; ++i) acc += g[i] * xv[i];
        wp->ensure_grad()[c] += acc;
      }
    }
  });
}

Var mean_over_channels(const Var& x) {
  assert(x->value.rank() == 3);
  const auto& sh = x->value.shape();
  const std::int64_t plane = static_cast<std::int64_t>(sh[1]) * sh[2];
  const double inv = 1.0 / sh[0];
  Tensor out({1, sh[1], sh[2]});
  for (int c = 0; c < sh[0]; ++c) {
    const double* src = x->value.data() + plane * c;
    for (std::int64_t i = 0; i < plane; ++i) out[i] += src[i] * inv;
  }
  return unary(x, std::move(out), [plane, channels = sh[0], inv](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (int c = 0; c < channels; ++c) {
      double* dst = g.data() + plane * c;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += n.grad[i] * inv;
    }
  });
}

// ---- region pooling --------------------------------------------------------

Var region_pool(const Var& x, int n_idx, double x0, double y0, double x1, double y1, int P) {
  assert(x->value.rank() == 4 && P >= 1);
  const auto& sh = x->value.shape();
  const int C = sh[1], H = sh[2], W = sh[3];
  if (!(x1 > x0 && y1 > y0)) throw std::invalid_argument("region_pool: empty region");

  // Per output bin: flat spatial cell index and its normalized overlap weight.
  struct Entry {
    int cell;
    double weight;
  };
  std::vector<std::vector<Entry>> bins(static_cast<std::size_t>(P) * P);
  const double bw = (x1 - x0) / P;
  const double bh = (y1 - y0) / P;
  for (int by = 0; by < P; ++by) {
    for (int bx = 0; bx < P; ++bx) {
      const double gx0 = x0 + bx * bw, gx1 = gx0 + bw;
      const double gy0 = y0 + by * bh, gy1 = gy0 + bh;
      auto& entries = bins[static_cast<std::size_t>(by) * P + bx];
      double total = 0;
      const int cy0 = std::max(0, static_cast<int>(std::floor(gy0)));
      const int cy1 = std::min(H - 1, static_cast<int>(std::ceil(gy1)) - 1);
      const int cx0 = std::max(0, static_cast<int>(std::floor(gx0)));
      const int cx1 = std::min(W - 1, static_cast<int>(std::ceil(gx1)) - 1);
      for (int cy = cy0; cy <= cy1; ++cy) {
        const double oy = std::min<double>(cy + 1, gy1) - std::max<double>(cy, gy0);
        if (oy <= 0) continue;
        for (int cx = cx0; cx <= cx1; ++cx) {
          const double ox = std::min<double>(cx + 1, gx1) - std::max<double>(cx, gx0);
          if (ox <= 0) continue;
          entries.push_back({cy * W + cx, oy * ox});
          total += oy * ox;
        }
      }
      if (entries.empty()) throw std::invalid_argument("region_pool: bin outside feature map");
      for (auto& e : entries) e.weight /= total;
    }
  }

  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t item = static_cast<std::int64_t>(C) * plane;
  Tensor out({C, P, P});
  const double* base = x->value.data() + item * n_idx;
  for (int c = 0; c < C; ++c) {
    const double* src = base + plane * c;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      double acc = 0;
      for (const auto& e : bins[b]) acc += e.weight * src[e.cell];
      out[c * static_cast<std::int64_t>(P) * P + static_cast<std::int64_t>(b)] = acc;
    }
  }
  return unary(x, std::move(out),
               [bins = std::move(bins), n_idx, C, plane, item, P](Node& n) {
                 if (!n.parents[0]->needs_grad) return;
                 Tensor& g = n.parents[0]->ensure_grad();
                 double* base = g.data() + item * n_idx;
                 for (int c = 0; c < C; ++c) {
                   double* dst = base + plane * c;
                   for (std::size_t b = 0; b < bins.size(); ++b) {
                     const double gv =
                         n.grad[c * static_cast<std::int64_t>(P) * P + static_cast<std::int64_t>(b)];
                     for (const auto& e : bins[b]) dst[e.cell] += gv * e.weight;
                   }
                 }
               });
}

// ---- pixel-wise top-k attention pooling -------------------------------------

Var ptap(const Var& x, const Var& w, int k) {
  assert(x->value.rank() == 3 && w->value.rank() == 1);
  const auto& sh = x->value.shape();
  const int C = sh[0], H = sh[1], W = sh[2];
  assert(w->value.size() == C && k >= 1 && k <= C);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;

  Tensor out({1, H, W});
  std::vector<int> picked(static_cast<std::size_t>(plane) * k);
  std::vector<int> order(C);
  for (std::int64_t p = 0; p < plane; ++p) {
    std::iota(order.begin(), order.end(), 0);
    const double* xv = x->value.data();
    const double* wv = w->value.data();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return wv[a] * xv[plane * a + p] > wv[b] * xv[plane * b + p];
    });
    double acc = 0;
    for (int i = 0; i < k; ++i) {
      const int c = order[i];
      picked[p * k + i] = c;
      acc += wv[c] * xv[plane * c + p];
    }
    out[p] = acc / k;
  }
  return make_node(std::move(out), {x, w},
                   [picked = std::move(picked), plane, k](Node& n) {
                     const Var& xp = n.parents[0];
                     const Var& wp = n.parents[1];
                     for (std::int64_t p = 0; p < plane; ++p) {
                       const double gv = n.grad[p] / k;
                       for (int i = 0; i < k; ++i) {
                         const int c = picked[p * k + i];
                         if (xp->needs_grad)
                           xp->ensure_grad()[plane * c + p] += gv * wp->value[c];
                         if (wp->needs_grad)
                           wp->ensure_grad()[c] += gv * xp->value[plane * c + p];
                       }
                     }
                   });
}

// ---- misc composites --------------------------------------------------------

Var l2_normalize(const Var& x) {
  assert(x->value.rank() == 1);
  double norm2 = 0;
  for (std::int64_t i = 0; i < x->value.size(); ++i) norm2 += x->value[i] * x->value[i];
  const double norm = std::sqrt(norm2);
  if (norm == 0.0) return x;
  Tensor out = x->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] /= norm;
  return unary(x, std::move(out), [norm](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    double dot = 0;
    for (std::int64_t i = 0; i < xv.size(); ++i) dot += n.grad[i] * xv[i];
    const double n3 = norm * norm * norm;
    for (std::int64_t i = 0; i < g.size(); ++i)
      g[i] += n.grad[i] / norm - xv[i] * dot / n3;
  });
}

Var masked_smooth_l1_sum(const Var& pred, Tensor target, Tensor mask, double beta) {
  assert(pred->value.same_shape(target) && pred->value.same_shape(mask));
  double loss = 0;
  for (std::int64_t i = 0; i < pred->value.size(); ++i) {
    if (mask[i] == 0) continue;
    const double d = std::abs(pred->value[i] - target[i]);
    loss += mask[i] * (d < beta ? 0.5 * d * d / beta : d - 0.5 * beta);
  }
  return unary(pred, Tensor::scalar(loss),
               [target = std::move(target), mask = std::move(mask), beta](Node& n) {
                 if (!n.parents[0]->needs_grad) return;
                 Tensor& g = n.parents[0]->ensure_grad();
                 const Tensor& p = n.parents[0]->value;
                 const double gv = n.grad[0];
                 for (std::int64_t i = 0; i < g.size(); ++i) {
                   if (mask[i] == 0) continue;
                   const double d = p[i] - target[i];
                   const double slope =
                       std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0);
                   g[i] += gv * mask[i] * slope;
                 }
               });
}

Var bce_with_logits_elems(const Var& logits, const Tensor& targets) {
  assert(logits->value.same_shape(targets));
  constexpr double kEps = 1e-7;
  Var p = sigmoid(logits);
  Var log_p = log_val(clamp_min(p, kEps));
  Var log_1p = log_val(clamp_min(rsub_scalar(1.0, p), kEps));
  Tensor one_minus = targets;
  for (std::int64_t i = 0; i < one_minus.size(); ++i) one_minus[i] = 1.0 - one_minus[i];
  return scale(add(mul_const(log_p, targets), mul_const(log_1p, std::move(one_minus))), -1.0);
}

Var bce_with_logits_sum(const Var& logits, const Tensor& targets) {
  return sum(bce_with_logits_elems(logits, targets));
}

Var squared_distance(const Var& a, const Var& b) { return sum(square(sub(a, b))); }

}  // namespace uda::nn
