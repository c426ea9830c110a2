#ifndef SCRNET_CONV_HPP
#define SCRNET_CONV_HPP

#include <Eigen/Core>

#include <string>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/filter.hpp"
#include "scrnet/tensor.hpp"

namespace scrnet {

namespace detail {

// Geometry of a strided convolution mapping a "big" plane onto a "small" one.
struct ConvGeometry {
  int channels, big_h, big_w, small_h, small_w, kernel, stride, padding;
  int rows() const { return channels * kernel * kernel; }
  int cols() const { return small_h * small_w; }
};

// cols[(c,ky,kx), (oy,ox)] = big[c, oy*s-p+ky, ox*s-p+kx] (zero outside).
template <typename T>
void im2col(const T* big, const ConvGeometry& g, T* cols) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * g.cols();
        for (int oy = 0; oy < g.small_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + oy * g.small_w;
          if (iy < 0 || iy >= g.big_h) {
            std::fill_n(dst, g.small_w, T(0));
            continue;
          }
          const T* src = big + (static_cast<std::size_t>(c) * g.big_h + iy) * g.big_w;
          for (int ox = 0; ox < g.small_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.big_w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the big plane.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* big) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * g.cols();
        for (int oy = 0; oy < g.small_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.big_h) continue;
          T* dst = big + (static_cast<std::size_t>(c) * g.big_h + iy) * g.big_w;
          const T* src = row + oy * g.small_w;
          for (int ox = 0; ox < g.small_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.big_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMajor<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMajor<T>>;

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  MutMap<T>(c, m, n).noalias() += ConstMap<T>(a, m, k) * ConstMap<T>(b, k, n);
}

// C[m x n] += A^T * B with A stored [k x m], B [k x n]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  MutMap<T>(c, m, n).noalias() += ConstMap<T>(a, k, m).transpose() * ConstMap<T>(b, k, n);
}

// C[m x n] += A * B^T with A stored [m x k], B [n x k]
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  MutMap<T>(c, m, n).noalias() += ConstMap<T>(a, m, k) * ConstMap<T>(b, n, k).transpose();
}

template <typename T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                     int padding, const char* op) {
  if (input.shape().size() != 4 || weight.shape().size() != 4) {
    throw InvalidArgument(std::string(op) + ": input and weight must be 4-D");
  }
  if (weight.dim(2) != weight.dim(3)) throw InvalidArgument(std::string(op) + ": kernel must be square");
  if (stride < 1 || padding < 0) throw InvalidArgument(std::string(op) + ": stride >= 1 and padding >= 0 required");
  if (bias.defined() && bias.shape().size() != 1) throw InvalidArgument(std::string(op) + ": bias must be 1-D");
}

}  // namespace detail

/// Cross-correlation. input [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout]
/// (may be undefined). Output [N,Cout,(H+2p-k)/s+1,(W+2p-k)/s+1].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding) {
  detail::check_conv_args(input, weight, bias, stride, padding, "conv2d");
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw InvalidArgument("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, got " +
                          std::to_string(cin));
  }
  if (bias.defined() && bias.dim(0) != cout) throw InvalidArgument("conv2d: bias length mismatch");
  if (h + 2 * padding < k || w + 2 * padding < k) throw InvalidArgument("conv2d: kernel larger than padded input");
  const detail::ConvGeometry g{cin, h, w, (h + 2 * padding - k) / stride + 1, (w + 2 * padding - k) / stride + 1,
                               k, stride, padding};
  const std::size_t in_stride = static_cast<std::size_t>(cin) * h * w;
  const std::size_t out_stride = static_cast<std::size_t>(cout) * g.cols();
  const std::size_t col_size = static_cast<std::size_t>(g.rows()) * g.cols();

  std::vector<T> out(n * out_stride, T(0));
  std::vector<T> cols(n * col_size);
  for (int i = 0; i < n; ++i) {
    detail::im2col(input.values().data() + i * in_stride, g, cols.data() + i * col_size);
    T* dst = out.data() + i * out_stride;
    if (bias.defined()) {
      for (int co = 0; co < cout; ++co) std::fill_n(dst + co * g.cols(), g.cols(), bias.values()[co]);
    }
    detail::gemm_nn(cout, g.cols(), g.rows(), weight.values().data(), cols.data() + i * col_size, dst);
  }

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return detail::make_result<T>(
      {n, cout, g.small_h, g.small_w}, std::move(out), std::move(inputs),
      [g, n, cout, in_stride, out_stride, col_size, cols = std::move(cols)](Node<T>& node) {
        auto& x = *node.inputs[0];
        auto& wt = *node.inputs[1];
        std::vector<T> dcols(x.requires_grad ? col_size : 0);
        for (int i = 0; i < n; ++i) {
          const T* gout = node.grad.data() + i * out_stride;
          if (wt.requires_grad) {
            detail::gemm_nt(cout, g.rows(), g.cols(), gout, cols.data() + i * col_size, wt.ensure_grad().data());
          }
          if (x.requires_grad) {
            std::fill(dcols.begin(), dcols.end(), T(0));
            detail::gemm_tn(g.rows(), g.cols(), cout, wt.value.data(), gout, dcols.data());
            detail::col2im(dcols.data(), g, x.ensure_grad().data() + i * in_stride);
          }
          if (node.inputs.size() > 2 && node.inputs[2]->requires_grad) {
            auto& gb = node.inputs[2]->ensure_grad();
            for (int co = 0; co < cout; ++co) {
              T acc = 0;
              for (int p = 0; p < g.cols(); ++p) acc += gout[co * g.cols() + p];
              gb[co] += acc;
            }
          }
        }
      });
}

/// Transposed (fractionally strided) convolution, the adjoint of conv2d in its
/// input. input [N,Cin,H,W], weight [Cin,Cout,k,k], bias [Cout].
/// Output [N,Cout,(H-1)s-2p+k,(W-1)s-2p+k].
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding) {
  detail::check_conv_args(input, weight, bias, stride, padding, "conv2d_transpose");
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin) {
    throw InvalidArgument("conv2d_transpose: weight expects " + std::to_string(weight.dim(0)) +
                          " input channels, got " + std::to_string(cin));
  }
  if (bias.defined() && bias.dim(0) != cout) throw InvalidArgument("conv2d_transpose: bias length mismatch");
  const int oh = (h - 1) * stride - 2 * padding + k;
  const int ow = (w - 1) * stride - 2 * padding + k;
  if (oh < 1 || ow < 1) throw InvalidArgument("conv2d_transpose: non-positive output size");
  const detail::ConvGeometry g{cout, oh, ow, h, w, k, stride, padding};
  const std::size_t in_stride = static_cast<std::size_t>(cin) * h * w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t out_stride = cout * out_plane;
  const std::size_t col_size = static_cast<std::size_t>(g.rows()) * g.cols();

  std::vector<T> out(n * out_stride, T(0));
  std::vector<T> cols(col_size);
  for (int i = 0; i < n; ++i) {
    std::fill(cols.begin(), cols.end(), T(0));
    detail::gemm_tn(g.rows(), g.cols(), cin, weight.values().data(), input.values().data() + i * in_stride,
                    cols.data());
    T* dst = out.data() + i * out_stride;
    detail::col2im(cols.data(), g, dst);
    if (bias.defined()) {
      for (int co = 0; co < cout; ++co) {
        const T b = bias.values()[co];
        for (std::size_t p = 0; p < out_plane; ++p) dst[co * out_plane + p] += b;
      }
    }
  }

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return detail::make_result<T>(
      {n, cout, oh, ow}, std::move(out), std::move(inputs),
      [g, n, cin, cout, in_stride, out_plane, out_stride, col_size](Node<T>& node) {
        auto& x = *node.inputs[0];
        auto& wt = *node.inputs[1];
        std::vector<T> gcols(col_size);
        for (int i = 0; i < n; ++i) {
          const T* gout = node.grad.data() + i * out_stride;
          detail::im2col(gout, g, gcols.data());
          if (x.requires_grad) {
            detail::gemm_nn(cin, g.cols(), g.rows(), wt.value.data(), gcols.data(),
                            x.ensure_grad().data() + i * in_stride);
          }
          if (wt.requires_grad) {
            detail::gemm_nt(cin, g.rows(), g.cols(), x.value.data() + i * in_stride, gcols.data(),
                            wt.ensure_grad().data());
          }
          if (node.inputs.size() > 2 && node.inputs[2]->requires_grad) {
            auto& gb = node.inputs[2]->ensure_grad();
            for (int co = 0; co < cout; ++co) {
              T acc = 0;
              for (std::size_t p = 0; p < out_plane; ++p) acc += gout[co * out_plane + p];
              gb[co] += acc;
            }
          }
        }
      });
}

namespace detail {

// Separable correlation of every plane with reflect-101 borders, or its adjoint.
template <typename T>
void separable_planes(const T* src, T* dst, std::size_t planes, int h, int w, const std::vector<T>& taps,
                      bool adjoint) {
  const int r = static_cast<int>(taps.size() / 2);
  const auto rows = reflect_table(h, r);
  const auto cols = reflect_table(w, r);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<T> tmp(plane);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = src + p * plane;
    T* out = dst + p * plane;
    std::fill(tmp.begin(), tmp.end(), T(0));
    if (!adjoint) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          T acc = 0;
          for (int d = 0; d <= 2 * r; ++d) acc += taps[d] * in[y * w + cols[x + d]];
          tmp[y * w + x] = acc;
        }
      for (int y = 0; y < h; ++y)
        for (int d = 0; d <= 2 * r; ++d) {
          const T* row = tmp.data() + static_cast<std::size_t>(rows[y + d]) * w;
          for (int x = 0; x < w; ++x) out[y * w + x] += taps[d] * row[x];
        }
    } else {
      for (int y = 0; y < h; ++y)
        for (int d = 0; d <= 2 * r; ++d) {
          T* row = tmp.data() + static_cast<std::size_t>(rows[y + d]) * w;
          for (int x = 0; x < w; ++x) row[x] += taps[d] * in[y * w + x];
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const T g = tmp[y * w + x];
          for (int d = 0; d <= 2 * r; ++d) out[y * w + cols[x + d]] += taps[d] * g;
        }
    }
  }
}

}  // namespace detail

/// Differentiable Gaussian low-pass of every channel (reflect-101 borders).
/// The kernel is a constant of the graph.
template <typename T>
Tensor<T> gaussian_lowpass(const Tensor<T>& x, const Kernel2D& kernel) {
  if (x.shape().size() != 4) throw InvalidArgument("gaussian_lowpass: expects an NCHW tensor");
  const int h = x.dim(2), w = x.dim(3);
  const std::size_t planes = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
  std::vector<T> taps(kernel.taps().begin(), kernel.taps().end());
  std::vector<T> out(x.numel(), T(0));
  detail::separable_planes(x.values().data(), out.data(), planes, h, w, taps, false);
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [planes, h, w, taps](Node<T>& n) {
    detail::separable_planes(n.grad.data(), n.inputs[0]->ensure_grad().data(), planes, h, w, taps, true);
  });
}

/// Differentiable high-frequency component: x - lowpass(x).
template <typename T>
Tensor<T> hfc(const Tensor<T>& x, const Kernel2D& kernel) {
  return sub(x, gaussian_lowpass(x, kernel));
}

}  // namespace scrnet

#endif  // SCRNET_CONV_HPP
