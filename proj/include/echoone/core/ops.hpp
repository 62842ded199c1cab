// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "echoone/core/autodiff.hpp"

namespace echoone {

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor<T> out(a->value.shape(), a->value.array() + b->value.array());
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.array());
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad.array());
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor<T> out(a->value.shape(), a->value.array() - b->value.array());
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.array());
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(-n.grad.array());
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor<T> out(a->value.shape(), a->value.array() * b->value.array());
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->accumulate(n.grad.array() * n.parents[1]->value.array());
    if (n.parents[1]->requires_grad)
      n.parents[1]->accumulate(n.grad.array() * n.parents[0]->value.array());
  });
}

template <typename T>
Var<T> div_elem(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "div");
  Tensor<T> out(a->value.shape(), a->value.array() / b->value.array());
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const auto& bv = n.parents[1]->value.array();
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.array() / bv);
    if (n.parents[1]->requires_grad)
      n.parents[1]->accumulate(-n.grad.array() * n.parents[0]->value.array() / (bv * bv));
  });
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  Tensor<T> out(a->value.shape(), -a->value.array());
  return make_op<T>(std::move(out), {a},
                    [](Node<T>& n) { n.parents[0]->accumulate(-n.grad.array()); });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a->value.shape(), a->value.array() * s);
  return make_op<T>(std::move(out), {a},
                    [s](Node<T>& n) { n.parents[0]->accumulate(n.grad.array() * s); });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T c) {
  Tensor<T> out(a->value.shape(), a->value.array() + c);
  return make_op<T>(std::move(out), {a},
                    [](Node<T>& n) { n.parents[0]->accumulate(n.grad.array()); });
}

/// Multiply a tensor by a learnable scalar (shape {1}).
template <typename T>
Var<T> scale_by(const Var<T>& a, const Var<T>& s) {
  T sv = s->value[0];
  Tensor<T> out(a->value.shape(), a->value.array() * sv);
  return make_op<T>(std::move(out), {a, s}, [sv](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.array() * sv);
    if (n.parents[1]->requires_grad) {
      ArrayX<T> ds(1);
      ds[0] = (n.grad.array() * n.parents[0]->value.array()).sum();
      n.parents[1]->accumulate(ds);
    }
  });
}

/// (N,C) + (C) broadcast over rows.
template <typename T>
Var<T> add_rowbias(const Var<T>& x, const Var<T>& b) {
  const Eigen::Index cols = b->value.size();
  const Eigen::Index rows = x->value.size() / cols;
  Tensor<T> out = x->value;
  out.mat(rows, cols).rowwise() += b->value.mat(1, cols).row(0);
  return make_op<T>(std::move(out), {x, b}, [rows, cols](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.array());
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensure_grad();
      n.parents[1]->grad.mat(1, cols) += n.grad.mat(rows, cols).colwise().sum();
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Eigen::Index m = a->value.dim(0), k = a->value.dim(1);
  if (b->value.dim(0) != k)
    throw ShapeMismatch("matmul " + shape_str(a->value.shape()) + " x " +
                        shape_str(b->value.shape()));
  const Eigen::Index ncols = b->value.dim(1);
  Tensor<T> out(Shape{static_cast<int>(m), static_cast<int>(ncols)});
  out.mat(m, ncols).noalias() = a->value.mat(m, k) * b->value.mat(k, ncols);
  return make_op<T>(std::move(out), {a, b}, [m, k, ncols](Node<T>& n) {
    auto g = n.grad.mat(m, ncols);
    if (n.parents[0]->requires_grad) {
      n.parents[0]->ensure_grad();
      n.parents[0]->grad.mat(m, k).noalias() += g * n.parents[1]->value.mat(k, ncols).transpose();
    }
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensure_grad();
      n.parents[1]->grad.mat(k, ncols).noalias() += n.parents[0]->value.mat(m, k).transpose() * g;
    }
  });
}

/// a (M,K) x b (N,K)^T -> (M,N); avoids materializing transposes in attention.
template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  const Eigen::Index m = a->value.dim(0), k = a->value.dim(1);
  if (b->value.dim(1) != k)
    throw ShapeMismatch("matmul_nt " + shape_str(a->value.shape()) + " x " +
                        shape_str(b->value.shape()));
  const Eigen::Index nn = b->value.dim(0);
  Tensor<T> out(Shape{static_cast<int>(m), static_cast<int>(nn)});
  out.mat(m, nn).noalias() = a->value.mat(m, k) * b->value.mat(nn, k).transpose();
  return make_op<T>(std::move(out), {a, b}, [m, k, nn](Node<T>& n) {
    auto g = n.grad.mat(m, nn);
    if (n.parents[0]->requires_grad) {
      n.parents[0]->ensure_grad();
      n.parents[0]->grad.mat(m, k).noalias() += g * n.parents[1]->value.mat(nn, k);
    }
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensure_grad();
      n.parents[1]->grad.mat(nn, k).noalias() += g.transpose() * n.parents[0]->value.mat(m, k);
    }
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out(a->value.shape(), a->value.array().max(T(0)));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    n.parents[0]->accumulate(
        (n.parents[0]->value.array() > T(0)).select(n.grad.array(), T(0)));
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out(a->value.shape(),
                (T(1) / (T(1) + (-a->value.array()).exp())));
  ArrayX<T> y = out.array();
  return make_op<T>(std::move(out), {a}, [y](Node<T>& n) {
    n.parents[0]->accumulate(n.grad.array() * y * (T(1) - y));
  });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
  Tensor<T> out(a->value.shape(), a->value.array().tanh());
  ArrayX<T> y = out.array();
  return make_op<T>(std::move(out), {a}, [y](Node<T>& n) {
    n.parents[0]->accumulate(n.grad.array() * (T(1) - y * y));
  });
}

/// Exact GELU x * Phi(x) with the erf form.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  ArrayX<T> phi = a->value.array().unaryExpr([](T v) {
    return T(0.5) * (T(1) + std::erf(v * T(0.70710678118654752440)));
  });
  Tensor<T> out(a->value.shape(), a->value.array() * phi);
  return make_op<T>(std::move(out), {a}, [phi](Node<T>& n) {
    const T inv_sqrt2pi = T(0.39894228040143267794);
    const auto& x = n.parents[0]->value.array();
    ArrayX<T> pdf = inv_sqrt2pi * (-T(0.5) * x * x).exp();
    n.parents[0]->accumulate(n.grad.array() * (phi + x * pdf));
  });
}

// ---------------------------------------------------------------------------
// Softmax / normalization
// ---------------------------------------------------------------------------

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  const Eigen::Index rows = a->value.dim(0), cols = a->value.size() / a->value.dim(0);
  Tensor<T> out = a->value;
  auto m = out.mat(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    T mx = m.row(r).maxCoeff();
    m.row(r).array() = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
  ArrayX<T> y = out.array();
  return make_op<T>(std::move(out), {a}, [rows, cols, y](Node<T>& n) {
    n.parents[0]->ensure_grad();
    Eigen::Map<const MatX<T>> ym(y.data(), rows, cols);
    auto g = n.grad.mat(rows, cols);
    auto dst = n.parents[0]->grad.mat(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      T dot = g.row(r).dot(ym.row(r));
      dst.row(r).array() += ym.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

/// Row-wise layer norm over the trailing dimension with affine parameters.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  T eps = T(1e-5)) {
  const Eigen::Index cols = gamma->value.size();
  const Eigen::Index rows = x->value.size() / cols;
  Tensor<T> xhat(x->value.shape());
  ArrayX<T> inv_std(rows);
  {
    auto xm = x->value.mat(rows, cols);
    auto hm = xhat.mat(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      T mu = xm.row(r).mean();
      T var = (xm.row(r).array() - mu).square().mean();
      T inv = T(1) / std::sqrt(var + eps);
      inv_std[r] = inv;
      hm.row(r) = (xm.row(r).array() - mu) * inv;
    }
  }
  Tensor<T> out(x->value.shape());
  {
    auto om = out.mat(rows, cols);
    auto hm = xhat.mat(rows, cols);
    ArrayX<T> gm = gamma->value.array();
    ArrayX<T> bm = beta->value.array();
    for (Eigen::Index r = 0; r < rows; ++r)
      om.row(r).transpose().array() = hm.row(r).transpose().array() * gm + bm;
  }
  ArrayX<T> xhat_flat = xhat.array();
  return make_op<T>(std::move(out), {x, gamma, beta},
                    [rows, cols, xhat_flat, inv_std](Node<T>& n) {
    Eigen::Map<const MatX<T>> hm(xhat_flat.data(), rows, cols);
    auto g = n.grad.mat(rows, cols);
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensure_grad();
      n.parents[1]->grad.mat(1, cols) += (g.array() * hm.array()).colwise().sum().matrix();
    }
    if (n.parents[2]->requires_grad) {
      n.parents[2]->ensure_grad();
      n.parents[2]->grad.mat(1, cols) += g.colwise().sum();
    }
    if (n.parents[0]->requires_grad) {
      n.parents[0]->ensure_grad();
      auto dst = n.parents[0]->grad.mat(rows, cols);
      ArrayX<T> gam = n.parents[1]->value.array();
      for (Eigen::Index r = 0; r < rows; ++r) {
        ArrayX<T> dxhat = g.row(r).transpose().array() * gam;
        ArrayX<T> hr = hm.row(r).transpose().array();
        T m1 = dxhat.mean();
        T m2 = (dxhat * hr).mean();
        dst.row(r).transpose().array() += inv_std[r] * (dxhat - m1 - hr * m2);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  Tensor<T> out(Shape{1});
  out[0] = a->value.array().sum();
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.array() += n.grad[0];
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  const T invn = T(1) / static_cast<T>(a->value.size());
  Tensor<T> out(Shape{1});
  out[0] = a->value.array().sum() * invn;
  return make_op<T>(std::move(out), {a}, [invn](Node<T>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.array() += n.grad[0] * invn;
  });
}

/// (C, rest...) -> (C): sum over all trailing dims.
template <typename T>
Var<T> sum_leading(const Var<T>& a) {
  const Eigen::Index c = a->value.dim(0);
  const Eigen::Index r = a->value.size() / c;
  Tensor<T> out(Shape{static_cast<int>(c)});
  out.mat(c, 1) = a->value.mat(c, r).rowwise().sum();
  return make_op<T>(std::move(out), {a}, [c, r](Node<T>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.mat(c, r).colwise() += n.grad.mat(c, 1).col(0);
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a->value.reshaped(std::move(shape));
  return make_op<T>(std::move(out), {a},
                    [](Node<T>& n) { n.parents[0]->accumulate(n.grad.array()); });
}

template <typename T>
Var<T> concat_dim0(const std::vector<Var<T>>& parts) {
  Shape shape = parts[0]->value.shape();
  Eigen::Index trail = parts[0]->value.size() / parts[0]->value.dim(0);
  int total = 0;
  for (const auto& p : parts) {
    if (p->value.size() / p->value.dim(0) != trail)
      throw ShapeMismatch("concat_dim0: trailing dims differ");
    total += p->value.dim(0);
  }
  shape[0] = total;
  Tensor<T> out(shape);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.array().segment(off, p->value.size()) = p->value.array();
    off += p->value.size();
  }
  std::vector<Var<T>> parents(parts.begin(), parts.end());
  return make_op<T>(std::move(out), std::move(parents), [](Node<T>& n) {
    Eigen::Index off = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad.array().segment(off, p->value.size()));
      off += p->value.size();
    }
  });
}

template <typename T>
Var<T> slice_dim0(const Var<T>& a, int start, int len) {
  Shape shape = a->value.shape();
  const Eigen::Index trail = a->value.size() / shape[0];
  shape[0] = len;
  Tensor<T> out(shape);
  out.array() = a->value.array().segment(start * trail, len * trail);
  return make_op<T>(std::move(out), {a}, [start, trail, len](Node<T>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.array().segment(start * trail, len * trail) += n.grad.array();
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  const Eigen::Index rows = parts[0]->value.dim(0);
  int total = 0;
  for (const auto& p : parts) {
    if (p->value.dim(0) != rows) throw ShapeMismatch("concat_cols: row count differs");
    total += p->value.dim(1);
  }
  Tensor<T> out(Shape{static_cast<int>(rows), total});
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.mat(rows, total).middleCols(off, p->value.dim(1)) =
        p->value.mat(rows, p->value.dim(1));
    off += p->value.dim(1);
  }
  std::vector<Var<T>> parents(parts.begin(), parts.end());
  return make_op<T>(std::move(out), std::move(parents), [rows, total](Node<T>& n) {
    Eigen::Index off = 0;
    for (auto& p : n.parents) {
      const Eigen::Index c = p->value.dim(1);
      if (p->requires_grad) {
        p->ensure_grad();
        p->grad.mat(rows, c) += n.grad.mat(rows, total).middleCols(off, c);
      }
      off += c;
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, int start, int len) {
  const Eigen::Index rows = a->value.dim(0), cols = a->value.dim(1);
  Tensor<T> out(Shape{static_cast<int>(rows), len});
  out.mat(rows, len) = a->value.mat(rows, cols).middleCols(start, len);
  return make_op<T>(std::move(out), {a}, [rows, cols, start, len](Node<T>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.mat(rows, cols).middleCols(start, len) += n.grad.mat(rows, len);
  });
}

/// (h*w, c) token rows -> (c, h, w) feature map.
template <typename T>
Var<T> tokens_to_chw(const Var<T>& a, int h, int w) {
  const int c = a->value.dim(1);
  Tensor<T> out(Shape{c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int t = 0; t < h * w; ++t) out[static_cast<Eigen::Index>(ci) * h * w + t] = a->value.at(t, ci);
  return make_op<T>(std::move(out), {a}, [c, h, w](Node<T>& n) {
    n.parents[0]->ensure_grad();
    for (int ci = 0; ci < c; ++ci)
      for (int t = 0; t < h * w; ++t)
        n.parents[0]->grad.at(t, ci) += n.grad[static_cast<Eigen::Index>(ci) * h * w + t];
  });
}

/// (c, h, w) feature map -> (h*w, c) token rows.
template <typename T>
Var<T> chw_to_tokens(const Var<T>& a) {
  const int c = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  Tensor<T> out(Shape{h * w, c});
  for (int ci = 0; ci < c; ++ci)
    for (int t = 0; t < h * w; ++t) out.at(t, ci) = a->value[static_cast<Eigen::Index>(ci) * h * w + t];
  return make_op<T>(std::move(out), {a}, [c, h, w](Node<T>& n) {
    n.parents[0]->ensure_grad();
    for (int ci = 0; ci < c; ++ci)
      for (int t = 0; t < h * w; ++t)
        n.parents[0]->grad[static_cast<Eigen::Index>(ci) * h * w + t] += n.grad.at(t, ci);
  });
}

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM); columns are rebuilt in the backward pass
// instead of cached, trading FLOPs for activation memory.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void im2col(const Tensor<T>& x, int kh, int kw, int stride, int pad, Tensor<T>& cols) {
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  T* dst = cols.data();
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                         ? x[(static_cast<Eigen::Index>(ci) * h + iy) * w + ix]
                         : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const Tensor<T>& cols, int cin, int h, int w, int kh, int kw, int stride,
                int pad, Tensor<T>& dx) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  const T* src = cols.data();
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w)
              dx[(static_cast<Eigen::Index>(ci) * h + iy) * w + ix] += *src;
            ++src;
          }
        }
      }
    }
  }
}

}  // namespace detail

/// x (Cin,H,W), w (Cout,Cin,kh,kw), optional bias (Cout) -> (Cout,Ho,Wo).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad) {
  const int cin = x->value.dim(0), h = x->value.dim(1), wdt = x->value.dim(2);
  const int cout = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  if (w->value.dim(1) != cin)
    throw ShapeMismatch("conv2d: weight expects " + std::to_string(w->value.dim(1)) +
                        " input channels, got " + std::to_string(cin));
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wdt + 2 * pad - kw) / stride + 1;
  const Eigen::Index ckk = static_cast<Eigen::Index>(cin) * kh * kw;
  const Eigen::Index npix = static_cast<Eigen::Index>(ho) * wo;

  Tensor<T> cols(Shape{static_cast<int>(ckk), static_cast<int>(npix)});
  detail::im2col(x->value, kh, kw, stride, pad, cols);
  Tensor<T> out(Shape{cout, ho, wo});
  out.mat(cout, npix).noalias() = w->value.mat(cout, ckk) * cols.mat(ckk, npix);
  if (bias && bias->value.size() > 0)
    out.mat(cout, npix).colwise() += bias->value.mat(cout, 1).col(0);

  std::vector<Var<T>> parents = {x, w};
  if (bias) parents.push_back(bias);
  return make_op<T>(std::move(out), std::move(parents),
                    [cin, h, wdt, kh, kw, stride, pad, cout, ckk, npix](Node<T>& n) {
    auto g = n.grad.mat(cout, npix);
    Var<T>& x = n.parents[0];
    Var<T>& w = n.parents[1];
    if (w->requires_grad || x->requires_grad) {
      if (w->requires_grad) {
        Tensor<T> cols(Shape{static_cast<int>(ckk), static_cast<int>(npix)});
        detail::im2col(x->value, kh, kw, stride, pad, cols);
        w->ensure_grad();
        w->grad.mat(cout, ckk).noalias() += g * cols.mat(ckk, npix).transpose();
      }
      if (x->requires_grad) {
        Tensor<T> dcols(Shape{static_cast<int>(ckk), static_cast<int>(npix)});
        dcols.mat(ckk, npix).noalias() = w->value.mat(cout, ckk).transpose() * g;
        x->ensure_grad();
        detail::col2im_add(dcols, cin, h, wdt, kh, kw, stride, pad, x->grad);
      }
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      n.parents[2]->ensure_grad();
      n.parents[2]->grad.mat(cout, 1) += g.rowwise().sum();
    }
  });
}

// ---------------------------------------------------------------------------
// Bilinear resize (half-pixel centers, clamped borders)
// ---------------------------------------------------------------------------

namespace detail {

struct ResizeAxis {
  std::vector<int> i0, i1;
  std::vector<double> f;  // fraction toward i1
};

inline ResizeAxis resize_axis(int in, int out) {
  ResizeAxis ax;
  ax.i0.resize(static_cast<size_t>(out));
  ax.i1.resize(static_cast<size_t>(out));
  ax.f.resize(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0) s = 0;
    if (s > in - 1) s = in - 1;
    int lo = static_cast<int>(std::floor(s));
    ax.i0[static_cast<size_t>(o)] = lo;
    ax.i1[static_cast<size_t>(o)] = lo + 1 < in ? lo + 1 : lo;
    ax.f[static_cast<size_t>(o)] = s - lo;
  }
  return ax;
}

}  // namespace detail

template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int ho, int wo) {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (h == ho && w == wo) return x;
  auto ay = detail::resize_axis(h, ho);
  auto ax = detail::resize_axis(w, wo);
  Tensor<T> out(Shape{c, ho, wo});
  for (int ci = 0; ci < c; ++ci) {
    const T* src = x->value.data() + static_cast<Eigen::Index>(ci) * h * w;
    T* dst = out.data() + static_cast<Eigen::Index>(ci) * ho * wo;
    for (int oy = 0; oy < ho; ++oy) {
      const T fy = static_cast<T>(ay.f[static_cast<size_t>(oy)]);
      const int y0 = ay.i0[static_cast<size_t>(oy)], y1 = ay.i1[static_cast<size_t>(oy)];
      for (int ox = 0; ox < wo; ++ox) {
        const T fx = static_cast<T>(ax.f[static_cast<size_t>(ox)]);
        const int x0 = ax.i0[static_cast<size_t>(ox)], x1 = ax.i1[static_cast<size_t>(ox)];
        T v00 = src[y0 * w + x0], v01 = src[y0 * w + x1];
        T v10 = src[y1 * w + x0], v11 = src[y1 * w + x1];
        dst[oy * wo + ox] = (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) +
                            fy * ((T(1) - fx) * v10 + fx * v11);
      }
    }
  }
  return make_op<T>(std::move(out), {x}, [c, h, w, ho, wo, ay, ax](Node<T>& n) {
    n.parents[0]->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      T* dx = n.parents[0]->grad.data() + static_cast<Eigen::Index>(ci) * h * w;
      const T* g = n.grad.data() + static_cast<Eigen::Index>(ci) * ho * wo;
      for (int oy = 0; oy < ho; ++oy) {
        const T fy = static_cast<T>(ay.f[static_cast<size_t>(oy)]);
        const int y0 = ay.i0[static_cast<size_t>(oy)], y1 = ay.i1[static_cast<size_t>(oy)];
        for (int ox = 0; ox < wo; ++ox) {
          const T fx = static_cast<T>(ax.f[static_cast<size_t>(ox)]);
          const int x0 = ax.i0[static_cast<size_t>(ox)], x1 = ax.i1[static_cast<size_t>(ox)];
          const T gv = g[oy * wo + ox];
          dx[y0 * w + x0] += (T(1) - fy) * (T(1) - fx) * gv;
          dx[y0 * w + x1] += (T(1) - fy) * fx * gv;
          dx[y1 * w + x0] += fy * (T(1) - fx) * gv;
          dx[y1 * w + x1] += fy * fx * gv;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Loss primitives
// ---------------------------------------------------------------------------

/// Numerically stable mean BCE on logits against a constant target in [0,1].
template <typename T>
Var<T> bce_with_logits_mean(const Var<T>& z, const Tensor<T>& target) {
  require_same_shape(z->value, target, "bce_with_logits");
  const auto& zv = z->value.array();
  const auto& tv = target.array();
  ArrayX<T> loss = zv.max(T(0)) - zv * tv + (T(1) + (-zv.abs()).exp()).log();
  Tensor<T> out(Shape{1});
  out[0] = loss.sum() / static_cast<T>(loss.size());
  ArrayX<T> t = tv;
  return make_op<T>(std::move(out), {z}, [t](Node<T>& n) {
    const auto& zv = n.parents[0]->value.array();
    ArrayX<T> sig = T(1) / (T(1) + (-zv).exp());
    n.parents[0]->accumulate((sig - t) * (n.grad[0] / static_cast<T>(t.size())));
  });
}

/// Mean BCE on probabilities with epsilon clamping; gradient is zero in the
/// clamped region.
template <typename T>
Var<T> bce_prob_mean(const Var<T>& p, const Tensor<T>& target, T eps) {
  require_same_shape(p->value, target, "bce_prob");
  ArrayX<T> pc = p->value.array().max(eps).min(T(1) - eps);
  const auto& tv = target.array();
  ArrayX<T> loss = -(tv * pc.log() + (T(1) - tv) * (T(1) - pc).log());
  Tensor<T> out(Shape{1});
  out[0] = loss.sum() / static_cast<T>(loss.size());
  ArrayX<T> t = tv;
  return make_op<T>(std::move(out), {p}, [t, eps](Node<T>& n) {
    const auto& pv = n.parents[0]->value.array();
    ArrayX<T> pc = pv.max(eps).min(T(1) - eps);
    ArrayX<T> inside =
        ((pv > eps) && (pv < T(1) - eps)).select(ArrayX<T>::Ones(pv.size()), ArrayX<T>::Zero(pv.size()));
    ArrayX<T> d = (pc - t) / (pc * (T(1) - pc));
    n.parents[0]->accumulate(inside * d * (n.grad[0] / static_cast<T>(t.size())));
  });
}

/// Cross entropy of a single logit row (P) against a class index.
template <typename T>
Var<T> cross_entropy_logits(const Var<T>& z, int label) {
  const auto& zv = z->value.array();
  T mx = zv.maxCoeff();
  T lse = std::log((zv - mx).exp().sum()) + mx;
  Tensor<T> out(Shape{1});
  out[0] = lse - zv[label];
  return make_op<T>(std::move(out), {z}, [label, mx, lse](Node<T>& n) {
    const auto& zv = n.parents[0]->value.array();
    ArrayX<T> soft = (zv - lse).exp();
    soft[label] -= T(1);
    n.parents[0]->accumulate(soft * n.grad[0]);
  });
}

}  // namespace echoone
