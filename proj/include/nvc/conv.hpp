#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>

#include "nvc/tensor.hpp"

namespace nvc {

// 2-D convolution (cross-correlation, no kernel flip) on NCHW tensors with
// OIKK kernels, realized as im2col + GEMM. The transposed convolution is the
// exact adjoint of conv2d for the same (kernel, stride, padding): its forward
// pass is conv2d's input-gradient arithmetic, so <conv(x), y> == <x, tconv(y)>
// holds to rounding. im2col buffers are rebuilt in the backward pass instead
// of being captured, keeping graph memory at one activation per node.

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

struct ConvDims {
  std::int64_t N, C, H, W;       // input
  std::int64_t O, K;             // kernel
  std::int64_t stride, pad;
  std::int64_t Ho, Wo;           // conv output
};

inline ConvDims conv_dims(const Shape& x, const Shape& w, std::int64_t stride,
                          std::int64_t pad, const char* op) {
  if (x.size() != 4 || w.size() != 4)
    throw shape_error(std::string(op) + ": expected 4-d input and kernel, got " +
                      shape_str(x) + " and " + shape_str(w));
  if (w[2] != w[3])
    throw shape_error(std::string(op) + ": kernel must be square, got " + shape_str(w));
  if (stride < 1) throw shape_error(std::string(op) + ": stride must be positive");
  if (pad < 0) throw shape_error(std::string(op) + ": padding must be non-negative");
  ConvDims d;
  d.N = x[0];
  d.C = x[1];
  d.H = x[2];
  d.W = x[3];
  d.O = w[0];
  d.K = w[2];
  d.stride = stride;
  d.pad = pad;
  d.Ho = (d.H + 2 * pad - d.K) / stride + 1;
  d.Wo = (d.W + 2 * pad - d.K) / stride + 1;
  return d;
}

// col is (C*K*K) x (Ho*Wo), column-major: one column per output position.
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
  const std::int64_t CKK = d.C * d.K * d.K;
  for (std::int64_t ho = 0; ho < d.Ho; ++ho)
    for (std::int64_t wo = 0; wo < d.Wo; ++wo) {
      T* dst = col + (ho * d.Wo + wo) * CKK;
      const std::int64_t h0 = ho * d.stride - d.pad;
      const std::int64_t w0 = wo * d.stride - d.pad;
      for (std::int64_t c = 0; c < d.C; ++c)
        for (std::int64_t ki = 0; ki < d.K; ++ki) {
          const std::int64_t ih = h0 + ki;
          for (std::int64_t kj = 0; kj < d.K; ++kj) {
            const std::int64_t iw = w0 + kj;
            *dst++ = (ih >= 0 && ih < d.H && iw >= 0 && iw < d.W)
                         ? x[(c * d.H + ih) * d.W + iw]
                         : T(0);
          }
        }
    }
}

// Adjoint of im2col: scatter-adds columns back into the image.
template <typename T>
void col2im_add(const T* col, const ConvDims& d, T* x) {
  for (std::int64_t ho = 0; ho < d.Ho; ++ho)
    for (std::int64_t wo = 0; wo < d.Wo; ++wo) {
      const T* src = col + (ho * d.Wo + wo) * d.C * d.K * d.K;
      const std::int64_t h0 = ho * d.stride - d.pad;
      const std::int64_t w0 = wo * d.stride - d.pad;
      for (std::int64_t c = 0; c < d.C; ++c)
        for (std::int64_t ki = 0; ki < d.K; ++ki) {
          const std::int64_t ih = h0 + ki;
          for (std::int64_t kj = 0; kj < d.K; ++kj) {
            const std::int64_t iw = w0 + kj;
            if (ih >= 0 && ih < d.H && iw >= 0 && iw < d.W)
              x[(c * d.H + ih) * d.W + iw] += *src;
            ++src;
          }
        }
    }
}

}  // namespace detail

/// conv2d(input NCHW, kernel OIKK) with square kernel, stride >= 1, pad >= 0.
/// Output spatial extent is floor((H + 2*pad - K) / stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::int64_t stride,
                 std::int64_t pad) {
  auto d = detail::conv_dims(x.shape(), w.shape(), stride, pad, "conv2d");
  if (d.C != w.shape()[1])
    throw shape_error("conv2d: input channels " + std::to_string(d.C) +
                      " != kernel input channels " + std::to_string(w.shape()[1]) +
                      " (input " + shape_str(x.shape()) + ", kernel " + shape_str(w.shape()) +
                      ")");
  if (d.Ho < 1 || d.Wo < 1)
    throw shape_error("conv2d: zero-size output for input " + shape_str(x.shape()) +
                      ", kernel " + shape_str(w.shape()) + ", stride " +
                      std::to_string(stride) + ", pad " + std::to_string(pad));

  const std::int64_t CKK = d.C * d.K * d.K, P = d.Ho * d.Wo;
  std::vector<T> out(static_cast<std::size_t>(d.N * d.O * P));
  std::vector<T> col(static_cast<std::size_t>(CKK * P));
  Eigen::Map<const detail::MatRM<T>> wm(w.data().data(), d.O, CKK);
  for (std::int64_t n = 0; n < d.N; ++n) {
    detail::im2col(x.data().data() + n * d.C * d.H * d.W, d, col.data());
    Eigen::Map<const detail::MatCM<T>> cm(col.data(), CKK, P);
    Eigen::Map<detail::MatRM<T>> om(out.data() + n * d.O * P, d.O, P);
    om.noalias() = wm * cm;
  }

  auto xn = x.node_ptr();
  auto wn = w.node_ptr();
  return detail::make_op<T>(
      {d.N, d.O, d.Ho, d.Wo}, std::move(out), {xn, wn},
      [xn, wn, d, CKK, P](detail::TensorNode<T>& node) {
        std::vector<T> col(static_cast<std::size_t>(CKK * P));
        std::vector<T> dcol(static_cast<std::size_t>(CKK * P));
        Eigen::Map<const detail::MatRM<T>> wm(wn->value.data(), d.O, CKK);
        for (std::int64_t n = 0; n < d.N; ++n) {
          Eigen::Map<const detail::MatRM<T>> gm(node.grad.data() + n * d.O * P, d.O, P);
          if (wn->requires_grad) {
            detail::im2col(xn->value.data() + n * d.C * d.H * d.W, d, col.data());
            Eigen::Map<const detail::MatCM<T>> cm(col.data(), CKK, P);
            Eigen::Map<detail::MatRM<T>> dwm(wn->grad.data(), d.O, CKK);
            dwm.noalias() += gm * cm.transpose();
          }
          if (xn->requires_grad) {
            Eigen::Map<detail::MatCM<T>> dcm(dcol.data(), CKK, P);
            dcm.noalias() = wm.transpose() * gm;
            detail::col2im_add(dcol.data(), d, xn->grad.data() + n * d.C * d.H * d.W);
          }
        }
      });
}

/// Adjoint of conv2d for the same (kernel, stride, padding). The input has the
/// kernel's O channels; the output has its I channels. `out_hw`, when given,
/// selects the exact output extents (conv2d's floor division makes several
/// input sizes map to the same output size); the default is the smallest,
/// (h-1)*stride + K - 2*pad.
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& y, const Tensor<T>& w, std::int64_t stride,
                            std::int64_t pad,
                            std::optional<std::pair<std::int64_t, std::int64_t>> out_hw =
                                std::nullopt) {
  const Shape& ys = y.shape();
  const Shape& ws = w.shape();
  if (ys.size() != 4 || ws.size() != 4)
    throw shape_error("transposed_conv2d: expected 4-d input and kernel, got " +
                      shape_str(ys) + " and " + shape_str(ws));
  if (ys[1] != ws[0])
    throw shape_error("transposed_conv2d: input channels " + std::to_string(ys[1]) +
                      " != kernel output channels " + std::to_string(ws[0]) + " (input " +
                      shape_str(ys) + ", kernel " + shape_str(ws) + ")");
  const std::int64_t K = ws[2];
  std::int64_t H = (ys[2] - 1) * stride + K - 2 * pad;
  std::int64_t W = (ys[3] - 1) * stride + K - 2 * pad;
  if (out_hw) {
    H = out_hw->first;
    W = out_hw->second;
  }
  if (H < 1 || W < 1)
    throw shape_error("transposed_conv2d: zero-size output for input " + shape_str(ys) +
                      ", kernel " + shape_str(ws));
  // d describes the *forward* conv this op is the adjoint of.
  detail::ConvDims d = detail::conv_dims({ys[0], ws[1], H, W}, ws, stride, pad,
                                         "transposed_conv2d");
  if (d.Ho != ys[2] || d.Wo != ys[3])
    throw shape_error("transposed_conv2d: output extents " + std::to_string(H) + "x" +
                      std::to_string(W) + " are not reachable from input " + shape_str(ys) +
                      " with kernel " + shape_str(ws) + ", stride " + std::to_string(stride) +
                      ", pad " + std::to_string(pad));

  const std::int64_t CKK = d.C * d.K * d.K, P = d.Ho * d.Wo;
  std::vector<T> out(static_cast<std::size_t>(d.N * d.C * d.H * d.W), T(0));
  std::vector<T> col(static_cast<std::size_t>(CKK * P));
  Eigen::Map<const detail::MatRM<T>> wm(w.data().data(), d.O, CKK);
  for (std::int64_t n = 0; n < d.N; ++n) {
    Eigen::Map<const detail::MatRM<T>> ym(y.data().data() + n * d.O * P, d.O, P);
    Eigen::Map<detail::MatCM<T>> cm(col.data(), CKK, P);
    cm.noalias() = wm.transpose() * ym;
    detail::col2im_add(col.data(), d, out.data() + n * d.C * d.H * d.W);
  }

  auto yn = y.node_ptr();
  auto wn = w.node_ptr();
  return detail::make_op<T>(
      {d.N, d.C, d.H, d.W}, std::move(out), {yn, wn},
      [yn, wn, d, CKK, P](detail::TensorNode<T>& node) {
        std::vector<T> col(static_cast<std::size_t>(CKK * P));
        Eigen::Map<const detail::MatRM<T>> wm(wn->value.data(), d.O, CKK);
        for (std::int64_t n = 0; n < d.N; ++n) {
          detail::im2col(node.grad.data() + n * d.C * d.H * d.W, d, col.data());
          Eigen::Map<const detail::MatCM<T>> cm(col.data(), CKK, P);
          if (yn->requires_grad) {
            Eigen::Map<detail::MatRM<T>> dym(yn->grad.data() + n * d.O * P, d.O, P);
            dym.noalias() += wm * cm;
          }
          if (wn->requires_grad) {
            Eigen::Map<const detail::MatRM<T>> ym(yn->value.data() + n * d.O * P, d.O, P);
            Eigen::Map<detail::MatRM<T>> dwm(wn->grad.data(), d.O, CKK);
            dwm.noalias() += ym * cm.transpose();
          }
        }
      });
}

/// Adds a per-channel bias to an NCHW tensor.
template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& b) {
  const Shape& s = x.shape();
  if (s.size() != 4 || b.shape() != Shape{s[1]})
    throw shape_error("bias_add: bias " + shape_str(b.shape()) + " does not match input " +
                      shape_str(s));
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  std::vector<T> out(x.data());
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c) {
      T bc = b.data()[c];
      T* p = out.data() + (n * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) p[i] += bc;
    }
  auto xn = x.node_ptr();
  auto bn = b.node_ptr();
  return detail::make_op<T>(s, std::move(out), {xn, bn},
                            [xn, bn, N, C, HW](detail::TensorNode<T>& node) {
                              for (std::int64_t n = 0; n < N; ++n)
                                for (std::int64_t c = 0; c < C; ++c) {
                                  const T* g = node.grad.data() + (n * C + c) * HW;
                                  if (xn->requires_grad) {
                                    T* dx = xn->grad.data() + (n * C + c) * HW;
                                    for (std::int64_t i = 0; i < HW; ++i) dx[i] += g[i];
                                  }
                                  if (bn->requires_grad) {
                                    T acc = 0;
                                    for (std::int64_t i = 0; i < HW; ++i) acc += g[i];
                                    bn->grad[c] += acc;
                                  }
                                }
                            });
}

}  // namespace nvc
