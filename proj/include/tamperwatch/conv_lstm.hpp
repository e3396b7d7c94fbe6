#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "tamperwatch/ops.hpp"
#include "tamperwatch/rng.hpp"

namespace tamperwatch {

/// Hidden and cell maps of one ConvLSTM cell, both hidden_channels x H x W.
template <typename Scalar>
struct CellStateT {
  FeatureMapT<Scalar> h;
  FeatureMapT<Scalar> c;
};

using CellState = CellStateT<double>;

template <typename Scalar>
CellStateT<Scalar> make_cell_state(int hidden_channels, int height, int width) {
  return CellStateT<Scalar>{FeatureMapT<Scalar>(hidden_channels, height, width),
                            FeatureMapT<Scalar>(hidden_channels, height, width)};
}

/// Full parameter set of one ConvLSTM cell: convolutional input-to-state and
/// state-to-state kernels for the input/forget/candidate/output gates, plus
/// elementwise peephole maps shaped like the cell state. Gate biases live on
/// the kernels (both kernels of a gate carry a bias; their sum is the
/// effective gate bias).
template <typename Scalar>
struct ConvLstmCellParamsT {
  int input_channels = 0;
  int hidden_channels = 0;
  int k = 0;
  int height = 0;
  int width = 0;

  ConvKernelT<Scalar> wx_i, wx_f, wx_c, wx_o;  // input -> gate
  ConvKernelT<Scalar> wh_i, wh_f, wh_c, wh_o;  // hidden -> gate
  FeatureMapT<Scalar> peep_i, peep_f, peep_o;  // cell -> gate, elementwise

  /// Visits every parameter array in declared order. The declared order is
  /// the serialization and optimizer-state order; keep it stable.
  template <typename Fn>
  void for_each_array(Fn&& fn) {
    fn("wx_i.w", wx_i.weights);
    fn("wx_i.b", wx_i.bias);
    fn("wx_f.w", wx_f.weights);
    fn("wx_f.b", wx_f.bias);
    fn("wx_c.w", wx_c.weights);
    fn("wx_c.b", wx_c.bias);
    fn("wx_o.w", wx_o.weights);
    fn("wx_o.b", wx_o.bias);
    fn("wh_i.w", wh_i.weights);
    fn("wh_i.b", wh_i.bias);
    fn("wh_f.w", wh_f.weights);
    fn("wh_f.b", wh_f.bias);
    fn("wh_c.w", wh_c.weights);
    fn("wh_c.b", wh_c.bias);
    fn("wh_o.w", wh_o.weights);
    fn("wh_o.b", wh_o.bias);
    fn("peep_i", peep_i.values);
    fn("peep_f", peep_f.values);
    fn("peep_o", peep_o.values);
  }
  template <typename Fn>
  void for_each_array(Fn&& fn) const {
    const_cast<ConvLstmCellParamsT*>(this)->for_each_array(
        [&fn](const char* name, ArrayX<Scalar>& a) { fn(name, const_cast<const ArrayX<Scalar>&>(a)); });
  }
};

using ConvLstmCellParams = ConvLstmCellParamsT<double>;

/// One gradient array per parameter array, shape-matched; reuses the
/// parameter layout so the same visitation order applies.
template <typename Scalar>
using GradientBundleT = ConvLstmCellParamsT<Scalar>;

using GradientBundle = GradientBundleT<double>;

template <typename Scalar>
ConvLstmCellParamsT<Scalar> make_cell_params(int input_channels, int hidden_channels, int k,
                                             int height, int width) {
  ConvLstmCellParamsT<Scalar> p;
  p.input_channels = input_channels;
  p.hidden_channels = hidden_channels;
  p.k = k;
  p.height = height;
  p.width = width;
  p.wx_i = ConvKernelT<Scalar>(hidden_channels, input_channels, k);
  p.wx_f = p.wx_i;
  p.wx_c = p.wx_i;
  p.wx_o = p.wx_i;
  p.wh_i = ConvKernelT<Scalar>(hidden_channels, hidden_channels, k);
  p.wh_f = p.wh_i;
  p.wh_c = p.wh_i;
  p.wh_o = p.wh_i;
  p.peep_i = FeatureMapT<Scalar>(hidden_channels, height, width);
  p.peep_f = p.peep_i;
  p.peep_o = p.peep_i;
  return p;
}

template <typename Scalar>
GradientBundleT<Scalar> make_gradient_bundle(const ConvLstmCellParamsT<Scalar>& params) {
  return make_cell_params<Scalar>(params.input_channels, params.hidden_channels, params.k,
                                  params.height, params.width);
}

/// Uniform +-1/sqrt(fan_in) weights per gate; forget-gate bias 1, other
/// biases 0. Draw order is fixed: wx gates i,f,c,o then wh gates then
/// peepholes i,f,o.
template <typename Scalar>
ConvLstmCellParamsT<Scalar> init_cell_params(int input_channels, int hidden_channels, int k,
                                             int height, int width, SplitMix64& rng) {
  auto p = make_cell_params<Scalar>(input_channels, hidden_channels, k, height, width);
  const double bound_x = 1.0 / std::sqrt(static_cast<double>(input_channels) * k * k);
  const double bound_h = 1.0 / std::sqrt(static_cast<double>(hidden_channels) * k * k);
  auto fill = [&rng](ArrayX<Scalar>& a, double bound) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
  };
  fill(p.wx_i.weights, bound_x);
  fill(p.wx_f.weights, bound_x);
  fill(p.wx_c.weights, bound_x);
  fill(p.wx_o.weights, bound_x);
  fill(p.wh_i.weights, bound_h);
  fill(p.wh_f.weights, bound_h);
  fill(p.wh_c.weights, bound_h);
  fill(p.wh_o.weights, bound_h);
  fill(p.peep_i.values, bound_h);
  fill(p.peep_f.values, bound_h);
  fill(p.peep_o.values, bound_h);
  p.wx_f.bias.setConstant(Scalar(1));
  return p;
}

/// Intermediates kept by cell_forward for the analytic backward pass.
template <typename Scalar>
struct CellCacheT {
  RowMatrix<Scalar> cols_x;  // im2col of the input
  RowMatrix<Scalar> cols_h;  // im2col of the previous hidden map
  FeatureMapT<Scalar> c_prev;
  FeatureMapT<Scalar> gate_i, gate_f, gate_g, gate_o;
  FeatureMapT<Scalar> c_next;
  FeatureMapT<Scalar> tanh_c;
  int input_channels = 0;
  int hidden_channels = 0;
  int k = 0;
};

using CellCache = CellCacheT<double>;

namespace detail {

template <typename Scalar>
void check_cell_shapes(const FeatureMapT<Scalar>& x, const CellStateT<Scalar>& prev,
                       const ConvLstmCellParamsT<Scalar>& params) {
  if (x.channels != params.input_channels) {
    throw std::invalid_argument("cell_forward: input shape " + x.shape_str() +
                                " does not match cell input channels " +
                                std::to_string(params.input_channels));
  }
  if (x.height != prev.h.height || x.width != prev.h.width) {
    throw std::invalid_argument("cell_forward: input shape " + x.shape_str() +
                                " does not match state shape " + prev.h.shape_str());
  }
  if (!prev.h.same_shape(prev.c) || prev.h.channels != params.hidden_channels ||
      prev.h.height != params.height || prev.h.width != params.width) {
    throw std::invalid_argument("cell_forward: state shape " + prev.h.shape_str() +
                                " does not match cell params " +
                                std::to_string(params.hidden_channels) + "x" +
                                std::to_string(params.height) + "x" + std::to_string(params.width));
  }
}

}  // namespace detail

/// One ConvLSTM step. Input and forget gates take their peephole from the
/// previous cell map, the output gate from the freshly updated one; the
/// hidden output is the gated tanh of the new cell map.
template <typename Scalar>
CellStateT<Scalar> cell_forward(const FeatureMapT<Scalar>& x, const CellStateT<Scalar>& prev,
                                const ConvLstmCellParamsT<Scalar>& params,
                                CellCacheT<Scalar>& cache) {
  detail::check_cell_shapes(x, prev, params);
  const int hc = params.hidden_channels;
  const int h = x.height;
  const int w = x.width;

  im2col(x, params.k, cache.cols_x);
  im2col(prev.h, params.k, cache.cols_h);

  auto pre = [&](const ConvKernelT<Scalar>& wx, const ConvKernelT<Scalar>& wh) {
    FeatureMapT<Scalar> z(hc, h, w);
    conv_accumulate(cache.cols_x, wx, z);
    conv_accumulate(cache.cols_h, wh, z);
    const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
    for (int oc = 0; oc < hc; ++oc) {
      z.values.segment(oc * plane, plane) += wx.bias[oc] + wh.bias[oc];
    }
    return z;
  };

  FeatureMapT<Scalar> zi = pre(params.wx_i, params.wh_i);
  zi.values += params.peep_i.values * prev.c.values;
  FeatureMapT<Scalar> zf = pre(params.wx_f, params.wh_f);
  zf.values += params.peep_f.values * prev.c.values;
  FeatureMapT<Scalar> zc = pre(params.wx_c, params.wh_c);

  cache.gate_i = sigmoid(zi);
  cache.gate_f = sigmoid(zf);
  cache.gate_g = tanh_map(zc);
  cache.c_prev = prev.c;

  CellStateT<Scalar> next;
  next.c = cache.gate_f;
  next.c.values = cache.gate_f.values * prev.c.values + cache.gate_i.values * cache.gate_g.values;

  FeatureMapT<Scalar> zo = pre(params.wx_o, params.wh_o);
  zo.values += params.peep_o.values * next.c.values;
  cache.gate_o = sigmoid(zo);

  cache.c_next = next.c;
  cache.tanh_c = tanh_map(next.c);
  next.h = cache.gate_o;
  next.h.values = cache.gate_o.values * cache.tanh_c.values;

  cache.input_channels = params.input_channels;
  cache.hidden_channels = hc;
  cache.k = params.k;
  return next;
}

/// Cache-free variant for inference.
template <typename Scalar>
CellStateT<Scalar> cell_forward(const FeatureMapT<Scalar>& x, const CellStateT<Scalar>& prev,
                                const ConvLstmCellParamsT<Scalar>& params) {
  CellCacheT<Scalar> cache;
  return cell_forward(x, prev, params, cache);
}

/// Backward pass of one ConvLSTM step. `grad_h`/`grad_c` are dLoss w.r.t.
/// this step's hidden and cell outputs. Parameter gradients accumulate into
/// `grads`; the input gradient (if requested) accumulates into `grad_x`; the
/// previous-state gradient accumulates into `grad_prev`. Callers zero the
/// accumulators when starting a fresh backward sweep.
template <typename Scalar>
void cell_backward(const FeatureMapT<Scalar>& grad_h, const FeatureMapT<Scalar>& grad_c,
                   const CellCacheT<Scalar>& cache, const ConvLstmCellParamsT<Scalar>& params,
                   GradientBundleT<Scalar>& grads, FeatureMapT<Scalar>* grad_x,
                   CellStateT<Scalar>* grad_prev) {
  if (cache.input_channels != params.input_channels ||
      cache.hidden_channels != params.hidden_channels || cache.k != params.k ||
      cache.c_next.height != params.height || cache.c_next.width != params.width) {
    throw InternalError("cell_backward: cache does not match the given cell params");
  }
  if (!grad_h.same_shape(cache.c_next) || !grad_c.same_shape(cache.c_next)) {
    throw std::invalid_argument("cell_backward: upstream gradient shape " + grad_h.shape_str() +
                                " does not match state shape " + cache.c_next.shape_str());
  }

  const auto& gi = cache.gate_i.values;
  const auto& gf = cache.gate_f.values;
  const auto& gg = cache.gate_g.values;
  const auto& go = cache.gate_o.values;
  const auto& tc = cache.tanh_c.values;

  FeatureMapT<Scalar> dz_o = grad_h;
  dz_o.values = grad_h.values * tc * go * (Scalar(1) - go);

  // Total cell-map gradient: upstream dC, the tanh branch of H, and the
  // output gate's peephole on C_t.
  ArrayX<Scalar> dc = grad_c.values + grad_h.values * go * (Scalar(1) - tc.square()) +
                      dz_o.values * params.peep_o.values;

  FeatureMapT<Scalar> dz_f = grad_h;
  dz_f.values = dc * cache.c_prev.values * gf * (Scalar(1) - gf);
  FeatureMapT<Scalar> dz_i = grad_h;
  dz_i.values = dc * gg * gi * (Scalar(1) - gi);
  FeatureMapT<Scalar> dz_c = grad_h;
  dz_c.values = dc * gi * (Scalar(1) - gg.square());

  grads.peep_o.values += dz_o.values * cache.c_next.values;
  grads.peep_i.values += dz_i.values * cache.c_prev.values;
  grads.peep_f.values += dz_f.values * cache.c_prev.values;

  if (grad_prev != nullptr) {
    grad_prev->c.values +=
        dc * gf + dz_i.values * params.peep_i.values + dz_f.values * params.peep_f.values;
  }

  auto back_gate = [&](const FeatureMapT<Scalar>& dz, const ConvKernelT<Scalar>& wx,
                       const ConvKernelT<Scalar>& wh, ConvKernelT<Scalar>& gwx,
                       ConvKernelT<Scalar>& gwh) {
    conv2d_same_backward(cache.cols_x, wx, dz, gwx, grad_x);
    conv2d_same_backward(cache.cols_h, wh, dz, gwh, grad_prev != nullptr ? &grad_prev->h : nullptr);
  };
  back_gate(dz_i, params.wx_i, params.wh_i, grads.wx_i, grads.wh_i);
  back_gate(dz_f, params.wx_f, params.wh_f, grads.wx_f, grads.wh_f);
  back_gate(dz_c, params.wx_c, params.wh_c, grads.wx_c, grads.wh_c);
  back_gate(dz_o, params.wx_o, params.wh_o, grads.wx_o, grads.wh_o);
}

}  // namespace tamperwatch
