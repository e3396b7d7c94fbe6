#pragma once

#include <algorithm>
#include <cmath>

#include "tamperwatch/feature_map.hpp"

namespace tamperwatch {

/// Unrolls the k x k neighbourhood of every pixel into one column: row index
/// is (ic, u, v), column index is (y, x). Out-of-image taps stay zero, which
/// is exactly the zero padding of conv2d_same.
template <typename Scalar>
void im2col(const FeatureMapT<Scalar>& in, int k, RowMatrix<Scalar>& cols) {
  const int r = k / 2;
  const int h = in.height;
  const int w = in.width;
  cols.setZero(static_cast<Eigen::Index>(in.channels) * k * k, static_cast<Eigen::Index>(h) * w);
  Eigen::Index row = 0;
  for (int ic = 0; ic < in.channels; ++ic) {
    for (int u = 0; u < k; ++u) {
      for (int v = 0; v < k; ++v, ++row) {
        const int x0 = std::max(0, r - v);
        const int x1 = std::min(w, w + r - v);
        if (x1 <= x0) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + u - r;
          if (sy < 0 || sy >= h) continue;
          const Scalar* src = in.values.data() + (static_cast<Eigen::Index>(ic) * h + sy) * w +
                              (x0 + v - r);
          cols.row(row).segment(static_cast<Eigen::Index>(y) * w + x0, x1 - x0) =
              Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(src, x1 - x0);
        }
      }
    }
  }
}

/// Scatter-add inverse of im2col.
template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, int k, FeatureMapT<Scalar>& out) {
  const int r = k / 2;
  const int h = out.height;
  const int w = out.width;
  Eigen::Index row = 0;
  for (int ic = 0; ic < out.channels; ++ic) {
    for (int u = 0; u < k; ++u) {
      for (int v = 0; v < k; ++v, ++row) {
        const int x0 = std::max(0, r - v);
        const int x1 = std::min(w, w + r - v);
        if (x1 <= x0) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + u - r;
          if (sy < 0 || sy >= h) continue;
          Scalar* dst = out.values.data() + (static_cast<Eigen::Index>(ic) * h + sy) * w +
                        (x0 + v - r);
          Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(dst, x1 - x0) +=
              cols.row(row).segment(static_cast<Eigen::Index>(y) * w + x0, x1 - x0);
        }
      }
    }
  }
}

/// 2-D convolution with zero padding chosen so output height/width equal the
/// input's; adds the kernel bias per output channel.
template <typename Scalar>
FeatureMapT<Scalar> conv2d_same(const FeatureMapT<Scalar>& in, const ConvKernelT<Scalar>& kernel) {
  if (in.channels != kernel.in_channels) {
    throw std::invalid_argument("conv2d_same: input shape " + in.shape_str() +
                                " does not match kernel shape " + kernel.shape_str());
  }
  if (kernel.k % 2 == 0) {
    throw std::invalid_argument("conv2d_same: kernel side must be odd, got k=" +
                                std::to_string(kernel.k));
  }
  RowMatrix<Scalar> cols;
  im2col(in, kernel.k, cols);
  FeatureMapT<Scalar> out(kernel.out_channels, in.height, in.width);
  const Eigen::Index taps = static_cast<Eigen::Index>(kernel.in_channels) * kernel.k * kernel.k;
  Eigen::Map<const RowMatrix<Scalar>> wm(kernel.weights.data(), kernel.out_channels, taps);
  Eigen::Map<RowMatrix<Scalar>> om(out.values.data(), kernel.out_channels,
                                   static_cast<Eigen::Index>(in.height) * in.width);
  om.noalias() = wm * cols;
  om.colwise() += kernel.bias.matrix();
  return out;
}

/// GEMM core of conv2d_same when the caller already holds the im2col matrix.
/// Accumulates into `out_pre` (which must be pre-sized) without bias.
template <typename Scalar>
void conv_accumulate(const RowMatrix<Scalar>& cols, const ConvKernelT<Scalar>& kernel,
                     FeatureMapT<Scalar>& out_pre) {
  const Eigen::Index taps = static_cast<Eigen::Index>(kernel.in_channels) * kernel.k * kernel.k;
  Eigen::Map<const RowMatrix<Scalar>> wm(kernel.weights.data(), kernel.out_channels, taps);
  Eigen::Map<RowMatrix<Scalar>> om(out_pre.values.data(), kernel.out_channels, cols.cols());
  om.noalias() += wm * cols;
}

/// Gradients of conv2d_same. `cols` is the im2col matrix of the forward
/// input; `grad_out` is dLoss/dOutput. Weight/bias gradients accumulate into
/// `grad_kernel`; the input gradient, when requested, accumulates into
/// `grad_in` (pre-sized to the forward input's shape).
template <typename Scalar>
void conv2d_same_backward(const RowMatrix<Scalar>& cols, const ConvKernelT<Scalar>& kernel,
                          const FeatureMapT<Scalar>& grad_out, ConvKernelT<Scalar>& grad_kernel,
                          FeatureMapT<Scalar>* grad_in) {
  const Eigen::Index taps = static_cast<Eigen::Index>(kernel.in_channels) * kernel.k * kernel.k;
  const Eigen::Index pixels = cols.cols();
  Eigen::Map<const RowMatrix<Scalar>> gom(grad_out.values.data(), kernel.out_channels, pixels);
  Eigen::Map<RowMatrix<Scalar>> gwm(grad_kernel.weights.data(), kernel.out_channels, taps);
  gwm.noalias() += gom * cols.transpose();
  grad_kernel.bias += gom.rowwise().sum().array();
  if (grad_in != nullptr) {
    Eigen::Map<const RowMatrix<Scalar>> wm(kernel.weights.data(), kernel.out_channels, taps);
    RowMatrix<Scalar> cols_grad(taps, pixels);
    cols_grad.noalias() = wm.transpose() * gom;
    col2im_add(cols_grad, kernel.k, *grad_in);
  }
}

/// Elementwise logistic function; outputs lie strictly inside (0, 1) for
/// inputs of moderate magnitude.
template <typename Scalar>
FeatureMapT<Scalar> sigmoid(const FeatureMapT<Scalar>& x) {
  FeatureMapT<Scalar> out = x;
  out.values = Scalar(0.5) * (Scalar(1) + (x.values * Scalar(0.5)).tanh());
  return out;
}

/// Elementwise tanh.
template <typename Scalar>
FeatureMapT<Scalar> tanh_map(const FeatureMapT<Scalar>& x) {
  FeatureMapT<Scalar> out = x;
  out.values = x.values.tanh();
  return out;
}

/// Elementwise (Hadamard) product of two shape-identical maps.
template <typename Scalar>
FeatureMapT<Scalar> hadamard(const FeatureMapT<Scalar>& a, const FeatureMapT<Scalar>& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("hadamard: shape " + a.shape_str() + " does not match shape " +
                                b.shape_str());
  }
  FeatureMapT<Scalar> out = a;
  out.values = a.values * b.values;
  return out;
}

}  // namespace tamperwatch
