#ifndef DTCD_OPS_HPP
#define DTCD_OPS_HPP

// Differentiable convolution, pooling, resampling and batched matrix ops.
// Convolutions lower to im2col + GEMM (Eigen), one sample at a time.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

#include "dtcd/autograd.hpp"

namespace dtcd {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (in + 2 * p < k) throw ShapeError("convolution window larger than padded input");
  return (in + 2 * p - k) / s + 1;
}

/// (C,H,W) -> (C*k*k, Ho*Wo) patch matrix.
template <class T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t s, std::size_t p,
            std::size_t ho, std::size_t wo, T* col) {
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = col + ((ch * k + ki) * k + kj) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ki) - static_cast<std::ptrdiff_t>(p);
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill_n(dst, wo, T(0));
            continue;
          }
          const T* src = x + (ch * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kj) - static_cast<std::ptrdiff_t>(p);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T(0) : src[ix];
          }
        }
      }
}

/// Adjoint of im2col: scatters-adds the patch matrix into (C,H,W).
template <class T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t s, std::size_t p,
            std::size_t ho, std::size_t wo, T* x) {
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = col + ((ch * k + ki) * k + kj) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ki) - static_cast<std::ptrdiff_t>(p);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = x + (ch * h + static_cast<std::size_t>(iy)) * w;
          const T* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kj) - static_cast<std::ptrdiff_t>(p);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace detail

/// 2-D cross-correlation. x: (N,Cin,H,W), weight: (Cout,Cin,k,k), bias: (Cout) or undefined.
template <std::floating_point T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride, std::size_t pad) {
  using namespace detail;
  require_rank4(x.value(), "conv2d input");
  require_rank4(weight.value(), "conv2d weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != k)
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " + shape_str(x.shape()));
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != cout) throw ShapeError("conv2d: bias size mismatch");
  const std::size_t ho = conv_out(h, k, stride, pad), wo = conv_out(w, k, stride, pad);
  const std::size_t kk = cin * k * k, hwo = ho * wo;
  const bool pointwise = k == 1 && stride == 1 && pad == 0;

  Tensor<T> out({n, cout, ho, wo});
  ConstMatMap<T> wm(weight.value().raw(), cout, kk);
  std::vector<T> col(pointwise ? 0 : kk * hwo);
  for (std::size_t b = 0; b < n; ++b) {
    const T* xb = x.value().raw() + b * cin * h * w;
    if (!pointwise) im2col(xb, cin, h, w, k, stride, pad, ho, wo, col.data());
    ConstMatMap<T> cm(pointwise ? xb : col.data(), kk, hwo);
    MatMap<T> om(out.raw() + b * cout * hwo, cout, hwo);
    om.noalias() = wm * cm;
    if (has_bias) om.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.value().raw(), cout);
  }

  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op<T>(std::move(out), std::move(inputs),
                    [=](Node<T>& self) {
                      const auto& xv = self.inputs[0]->value;
                      const auto& wv = self.inputs[1]->value;
                      auto* gx = self.input_grad(0);
                      auto* gw = self.input_grad(1);
                      auto* gb = has_bias ? self.input_grad(2) : nullptr;
                      ConstMatMap<T> wm(wv.raw(), cout, kk);
                      std::vector<T> col(pointwise ? 0 : kk * hwo);
                      RowMat<T> gcol;
                      for (std::size_t b = 0; b < n; ++b) {
                        ConstMatMap<T> go(self.grad.raw() + b * cout * hwo, cout, hwo);
                        const T* xb = xv.raw() + b * cin * h * w;
                        if (gw) {
                          if (!pointwise) im2col(xb, cin, h, w, k, stride, pad, ho, wo, col.data());
                          ConstMatMap<T> cm(pointwise ? xb : col.data(), kk, hwo);
                          MatMap<T>(gw->raw(), cout, kk).noalias() += go * cm.transpose();
                        }
                        if (gb) Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->raw(), cout) += go.rowwise().sum();
                        if (gx) {
                          T* gxb = gx->raw() + b * cin * h * w;
                          if (pointwise) {
                            MatMap<T>(gxb, cin, hwo).noalias() += wm.transpose() * go;
                          } else {
                            gcol.noalias() = wm.transpose() * go;
                            col2im(gcol.data(), cin, h, w, k, stride, pad, ho, wo, gxb);
                          }
                        }
                      }
                    });
}

/// Transposed convolution (fractionally strided). x: (N,Cin,H,W),
/// weight: (Cin,Cout,k,k). Output size (H-1)*stride - 2*pad + k.
template <std::floating_point T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride,
                        std::size_t pad) {
  using namespace detail;
  require_rank4(x.value(), "conv_transpose2d input");
  require_rank4(weight.value(), "conv_transpose2d weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin) throw ShapeError("conv_transpose2d: weight/input channel mismatch");
  if ((h - 1) * stride + k < 2 * pad + 1) throw ShapeError("conv_transpose2d: empty output");
  const std::size_t ho = (h - 1) * stride + k - 2 * pad, wo = (w - 1) * stride + k - 2 * pad;
  const std::size_t ckk = cout * k * k, hw = h * w;
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != cout) throw ShapeError("conv_transpose2d: bias size mismatch");

  Tensor<T> out({n, cout, ho, wo});
  ConstMatMap<T> wm(weight.value().raw(), cin, ckk);
  RowMat<T> col;
  for (std::size_t b = 0; b < n; ++b) {
    ConstMatMap<T> xm(x.value().raw() + b * cin * hw, cin, hw);
    col.noalias() = wm.transpose() * xm;
    T* ob = out.raw() + b * cout * ho * wo;
    col2im(col.data(), cout, ho, wo, k, stride, pad, h, w, ob);
    if (has_bias)
      for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t i = 0; i < ho * wo; ++i) ob[c * ho * wo + i] += bias.value()[c];
  }

  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op<T>(std::move(out), std::move(inputs), [=](Node<T>& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& wv = self.inputs[1]->value;
    auto* gx = self.input_grad(0);
    auto* gw = self.input_grad(1);
    auto* gb = has_bias ? self.input_grad(2) : nullptr;
    ConstMatMap<T> wm(wv.raw(), cin, ckk);
    std::vector<T> gcol(ckk * hw);
    for (std::size_t b = 0; b < n; ++b) {
      const T* gob = self.grad.raw() + b * cout * ho * wo;
      im2col(gob, cout, ho, wo, k, stride, pad, h, w, gcol.data());
      ConstMatMap<T> gc(gcol.data(), ckk, hw);
      if (gx) MatMap<T>(gx->raw() + b * cin * hw, cin, hw).noalias() += wm * gc;
      if (gw) MatMap<T>(gw->raw(), cin, ckk).noalias() += ConstMatMap<T>(xv.raw() + b * cin * hw, cin, hw) * gc.transpose();
      if (gb)
        for (std::size_t c = 0; c < cout; ++c) {
          T acc = 0;
          for (std::size_t i = 0; i < ho * wo; ++i) acc += gob[c * ho * wo + i];
          (*gb)[c] += acc;
        }
    }
  });
}

template <std::floating_point T>
Var<T> max_pool2d(const Var<T>& x, std::size_t k, std::size_t stride, std::size_t pad) {
  require_rank4(x.value(), "max_pool2d");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = detail::conv_out(h, k, stride, pad), wo = detail::conv_out(w, k, stride, pad);
  Tensor<T> out({n, c, ho, wo});
  std::vector<std::size_t> argmax(out.numel());
  const auto& xv = x.value();
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t arg = 0;
        for (std::size_t ki = 0; ki < k; ++ki) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kj = 0; kj < k; ++kj) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t idx = (p * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix);
            if (xv[idx] > best) {
              best = xv[idx];
              arg = idx;
            }
          }
        }
        const std::size_t o = (p * ho + oy) * wo + ox;
        out[o] = best;
        argmax[o] = arg;
      }
  return make_op<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t o = 0; o < argmax.size(); ++o) (*g)[argmax[o]] += self.grad[o];
  });
}

namespace detail {
struct PoolRange {
  std::size_t begin, end;
};
inline std::vector<PoolRange> adaptive_ranges(std::size_t in, std::size_t out) {
  std::vector<PoolRange> r(out);
  for (std::size_t i = 0; i < out; ++i) r[i] = {(i * in) / out, ((i + 1) * in + out - 1) / out};
  return r;
}
}  // namespace detail

/// Averages over adaptive windows so that the output is exactly (oh, ow).
template <std::floating_point T>
Var<T> adaptive_avg_pool2d(const Var<T>& x, std::size_t oh, std::size_t ow) {
  require_rank4(x.value(), "adaptive_avg_pool2d");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (oh == 0 || ow == 0 || oh > h || ow > w)
    throw ShapeError("adaptive_avg_pool2d: output " + std::to_string(oh) + "x" + std::to_string(ow) +
                     " exceeds input " + std::to_string(h) + "x" + std::to_string(w));
  const auto ry = detail::adaptive_ranges(h, oh), rx = detail::adaptive_ranges(w, ow);
  Tensor<T> out({n, c, oh, ow});
  const auto& xv = x.value();
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        T acc = 0;
        for (std::size_t y = ry[i].begin; y < ry[i].end; ++y)
          for (std::size_t xx = rx[j].begin; xx < rx[j].end; ++xx) acc += xv[(p * h + y) * w + xx];
        out[(p * oh + i) * ow + j] = acc / T((ry[i].end - ry[i].begin) * (rx[j].end - rx[j].begin));
      }
  return make_op<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto* g = self.input_grad(0);
    if (!g) return;
    for (std::size_t p = 0; p < n * c; ++p)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const T share = self.grad[(p * oh + i) * ow + j] / T((ry[i].end - ry[i].begin) * (rx[j].end - rx[j].begin));
          for (std::size_t y = ry[i].begin; y < ry[i].end; ++y)
            for (std::size_t xx = rx[j].begin; xx < rx[j].end; ++xx) (*g)[(p * h + y) * w + xx] += share;
        }
  });
}

namespace detail {
template <class T>
struct LerpTap {
  std::size_t i0, i1;
  T w0, w1;
};
// Half-pixel centres, edge-clamped.
template <class T>
std::vector<LerpTap<T>> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap<T>> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    std::size_t i0 = std::min(static_cast<std::size_t>(src), in - 1);
    std::size_t i1 = std::min(i0 + 1, in - 1);
    const T l1 = static_cast<T>(src - static_cast<double>(i0));
    taps[o] = {i0, i1, T(1) - l1, l1};
  }
  return taps;
}
}  // namespace detail

template <std::floating_point T>
Var<T> upsample_bilinear(const Var<T>& x, std::size_t oh, std::size_t ow) {
  require_rank4(x.value(), "upsample_bilinear");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ty = detail::bilinear_taps<T>(h, oh);
  const auto tx = detail::bilinear_taps<T>(w, ow);
  Tensor<T> out({n, c, oh, ow});
  const auto& xv = x.value();
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* src = xv.raw() + p * h * w;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const auto& a = ty[i];
        const auto& b = tx[j];
        out[(p * oh + i) * ow + j] = a.w0 * (b.w0 * src[a.i0 * w + b.i0] + b.w1 * src[a.i0 * w + b.i1]) +
                                     a.w1 * (b.w0 * src[a.i1 * w + b.i0] + b.w1 * src[a.i1 * w + b.i1]);
      }
  }
  return make_op<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto* g = self.input_grad(0);
    if (!g) return;
    for (std::size_t p = 0; p < n * c; ++p) {
      T* dst = g->raw() + p * h * w;
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const T go = self.grad[(p * oh + i) * ow + j];
          const auto& a = ty[i];
          const auto& b = tx[j];
          dst[a.i0 * w + b.i0] += go * a.w0 * b.w0;
          dst[a.i0 * w + b.i1] += go * a.w0 * b.w1;
          dst[a.i1 * w + b.i0] += go * a.w1 * b.w0;
          dst[a.i1 * w + b.i1] += go * a.w1 * b.w1;
        }
    }
  });
}

/// Batched product op(a) * op(b) for rank-3 tensors, op = optional transpose
/// of the trailing two axes.
template <std::floating_point T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool trans_a = false, bool trans_b = false) {
  using namespace detail;
  if (a.shape().size() != 3 || b.shape().size() != 3 || a.dim(0) != b.dim(0))
    throw ShapeError("bmm: expected rank-3 tensors with equal batch");
  const std::size_t nb = a.dim(0);
  const std::size_t ar = a.dim(1), ac = a.dim(2), br = b.dim(1), bc = b.dim(2);
  const std::size_t m = trans_a ? ac : ar, ka = trans_a ? ar : ac;
  const std::size_t kb = trans_b ? bc : br, p = trans_b ? br : bc;
  if (ka != kb) throw ShapeError("bmm: inner dimensions differ");
  Tensor<T> out({nb, m, p});
  for (std::size_t i = 0; i < nb; ++i) {
    ConstMatMap<T> am(a.value().raw() + i * ar * ac, ar, ac);
    ConstMatMap<T> bm(b.value().raw() + i * br * bc, br, bc);
    MatMap<T> om(out.raw() + i * m * p, m, p);
    if (trans_a && trans_b) om.noalias() = am.transpose() * bm.transpose();
    else if (trans_a) om.noalias() = am.transpose() * bm;
    else if (trans_b) om.noalias() = am * bm.transpose();
    else om.noalias() = am * bm;
  }
  return make_op<T>(std::move(out), {a, b}, [=](Node<T>& self) {
    auto* ga = self.input_grad(0);
    auto* gb = self.input_grad(1);
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    for (std::size_t i = 0; i < nb; ++i) {
      ConstMatMap<T> go(self.grad.raw() + i * m * p, m, p);
      ConstMatMap<T> am(av.raw() + i * ar * ac, ar, ac);
      ConstMatMap<T> bm(bv.raw() + i * br * bc, br, bc);
      if (ga) {
        MatMap<T> g(ga->raw() + i * ar * ac, ar, ac);
        // d op(A) = dC * op(B)^T
        if (trans_a) {
          if (trans_b) g.noalias() += bm.transpose() * go.transpose();
          else g.noalias() += bm * go.transpose();
        } else {
          if (trans_b) g.noalias() += go * bm;
          else g.noalias() += go * bm.transpose();
        }
      }
      if (gb) {
        MatMap<T> g(gb->raw() + i * br * bc, br, bc);
        // d op(B) = op(A)^T * dC
        if (trans_b) {
          if (trans_a) g.noalias() += go.transpose() * am.transpose();
          else g.noalias() += go.transpose() * am;
        } else {
          if (trans_a) g.noalias() += am * go;
          else g.noalias() += am.transpose() * go;
        }
      }
    }
  });
}

/// Softmax along the last axis.
template <std::floating_point T>
Var<T> softmax_rows(const Var<T>& x) {
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  using Row = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
  using ConstRow = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    Row row(out.raw() + r * cols, static_cast<Eigen::Index>(cols));
    row = (row - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return make_op<T>(std::move(out), {x}, [rows, cols](Node<T>& self) {
    auto* g = self.input_grad(0);
    if (!g) return;
    const auto n = static_cast<Eigen::Index>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      ConstRow y(self.value.raw() + r * cols, n);
      ConstRow gy(self.grad.raw() + r * cols, n);
      Row gx(g->raw() + r * cols, n);
      const T dot = (y * gy).sum();
      gx += y * (gy - dot);
    }
  });
}

}  // namespace dtcd

#endif  // DTCD_OPS_HPP
