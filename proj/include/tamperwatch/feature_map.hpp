#pragma once

#include <Eigen/Dense>
#include <string>

#include "tamperwatch/errors.hpp"

namespace tamperwatch {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense C x H x W map of 64-bit reals in row-major (channel, row, col) order.
/// Frames, gate activations, hidden and cell states are all FeatureMaps.
template <typename Scalar>
struct FeatureMapT {
  int channels = 0;
  int height = 0;
  int width = 0;
  ArrayX<Scalar> values;  // length channels * height * width

  FeatureMapT() = default;
  FeatureMapT(int c, int h, int w)
      : channels(c), height(h), width(w), values(ArrayX<Scalar>::Zero(c * h * w)) {}

  static FeatureMapT zeros(int c, int h, int w) { return FeatureMapT(c, h, w); }

  static FeatureMapT constant(int c, int h, int w, Scalar v) {
    FeatureMapT m(c, h, w);
    m.values.setConstant(v);
    return m;
  }

  Eigen::Index size() const { return values.size(); }

  Scalar& at(int c, int y, int x) { return values[(c * height + y) * width + x]; }
  Scalar at(int c, int y, int x) const { return values[(c * height + y) * width + x]; }

  /// H x W view of one channel.
  auto channel(int c) {
    return Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data() + static_cast<Eigen::Index>(c) * height * width, height, width);
  }
  auto channel(int c) const {
    return Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data() + static_cast<Eigen::Index>(c) * height * width, height, width);
  }

  bool same_shape(const FeatureMapT& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  std::string shape_str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

using FeatureMap = FeatureMapT<double>;

/// Convolution weights for a "same"-padded 2-D convolution: out_channels x
/// in_channels x k x k weights in row-major order plus one bias per output
/// channel. k must be odd so the padded output keeps the input dimensions.
template <typename Scalar>
struct ConvKernelT {
  int out_channels = 0;
  int in_channels = 0;
  int k = 0;
  ArrayX<Scalar> weights;  // (oc, ic, u, v) row-major
  ArrayX<Scalar> bias;     // length out_channels

  ConvKernelT() = default;
  ConvKernelT(int oc, int ic, int kk)
      : out_channels(oc),
        in_channels(ic),
        k(kk),
        weights(ArrayX<Scalar>::Zero(static_cast<Eigen::Index>(oc) * ic * kk * kk)),
        bias(ArrayX<Scalar>::Zero(oc)) {
    if (kk % 2 == 0) {
      throw std::invalid_argument("conv kernel side must be odd, got k=" + std::to_string(kk));
    }
  }

  Scalar& w(int oc, int ic, int u, int v) {
    return weights[((static_cast<Eigen::Index>(oc) * in_channels + ic) * k + u) * k + v];
  }
  Scalar w(int oc, int ic, int u, int v) const {
    return weights[((static_cast<Eigen::Index>(oc) * in_channels + ic) * k + u) * k + v];
  }

  std::string shape_str() const {
    return std::to_string(out_channels) + "x" + std::to_string(in_channels) + "x" +
           std::to_string(k) + "x" + std::to_string(k);
  }
};

using ConvKernel = ConvKernelT<double>;

}  // namespace tamperwatch
