#pragma once

#include <cmath>
#include <vector>

#include "tamperwatch/conv_lstm.hpp"

namespace tamperwatch {

namespace detail {

/// Mean squared error between a map and a target of the same shape.
template <typename Scalar>
double map_mse(const FeatureMapT<Scalar>& a, const FeatureMapT<Scalar>& b) {
  return static_cast<double>((a.values - b.values).square().mean());
}

template <typename To, typename From>
FeatureMapT<To> cast_map(const FeatureMapT<From>& m) {
  FeatureMapT<To> out(m.channels, m.height, m.width);
  out.values = m.values.template cast<To>();
  return out;
}

template <typename To, typename From>
ConvLstmCellParamsT<To> cast_params(const ConvLstmCellParamsT<From>& p) {
  auto out = make_cell_params<To>(p.input_channels, p.hidden_channels, p.k, p.height, p.width);
  std::vector<ArrayX<To>*> dst;
  out.for_each_array([&](const char*, ArrayX<To>& a) { dst.push_back(&a); });
  std::size_t i = 0;
  p.for_each_array([&](const char*, const ArrayX<From>& a) {
    *dst[i++] = a.template cast<To>();
  });
  return out;
}

}  // namespace detail

/// Unrolls a single cell over `inputs` from a zero state and returns the MSE
/// between the final hidden map and `target`, in the cell's own scalar type.
template <typename Scalar>
Scalar unrolled_cell_loss_l(const ConvLstmCellParamsT<Scalar>& params,
                            const std::vector<FeatureMapT<Scalar>>& inputs,
                            const FeatureMapT<Scalar>& target) {
  auto state = make_cell_state<Scalar>(params.hidden_channels, params.height, params.width);
  for (const auto& x : inputs) {
    state = cell_forward(x, state, params);
  }
  const Scalar loss = (state.h.values - target.values).square().mean();
  if (!std::isfinite(static_cast<double>(loss))) {
    throw NumericError("unrolled_cell_loss: loss is not finite");
  }
  return loss;
}

template <typename Scalar>
double unrolled_cell_loss(const ConvLstmCellParamsT<Scalar>& params,
                          const std::vector<FeatureMapT<Scalar>>& inputs,
                          const FeatureMapT<Scalar>& target) {
  return static_cast<double>(unrolled_cell_loss_l(params, inputs, target));
}

/// Analytic gradients of unrolled_cell_loss via backprop through time.
template <typename Scalar>
GradientBundleT<Scalar> unrolled_cell_gradients(const ConvLstmCellParamsT<Scalar>& params,
                                                const std::vector<FeatureMapT<Scalar>>& inputs,
                                                const FeatureMapT<Scalar>& target) {
  const int steps = static_cast<int>(inputs.size());
  std::vector<CellCacheT<Scalar>> caches(steps);
  auto state = make_cell_state<Scalar>(params.hidden_channels, params.height, params.width);
  for (int t = 0; t < steps; ++t) {
    state = cell_forward(inputs[t], state, params, caches[t]);
  }

  auto grads = make_gradient_bundle(params);
  auto grad_state = make_cell_state<Scalar>(params.hidden_channels, params.height, params.width);
  grad_state.h.values =
      Scalar(2) * (state.h.values - target.values) / static_cast<Scalar>(target.size());
  for (int t = steps - 1; t >= 0; --t) {
    auto grad_prev = make_cell_state<Scalar>(params.hidden_channels, params.height, params.width);
    cell_backward(grad_state.h, grad_state.c, caches[t], params, grads,
                  static_cast<FeatureMapT<Scalar>*>(nullptr), &grad_prev);
    grad_state = grad_prev;
  }
  return grads;
}

/// Central-difference check of the analytic cell gradients. Returns
/// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over every
/// parameter component. Intended for small cells (<= 5000 parameters).
///
/// The perturbed losses are evaluated in extended precision: the difference
/// quotient amplifies the loss roundoff by 1/epsilon, which in plain double
/// drowns components near the relative-error floor.
template <typename Scalar>
double gradient_check(const ConvLstmCellParamsT<Scalar>& params,
                      const std::vector<FeatureMapT<Scalar>>& inputs,
                      const FeatureMapT<Scalar>& target, double epsilon = 1e-5) {
  auto analytic = unrolled_cell_gradients(params, inputs, target);
  std::vector<const ArrayX<Scalar>*> analytic_arrays;
  analytic.for_each_array(
      [&](const char*, ArrayX<Scalar>& a) { analytic_arrays.push_back(&a); });

  auto work = detail::cast_params<long double>(params);
  std::vector<FeatureMapT<long double>> inputs_l;
  inputs_l.reserve(inputs.size());
  for (const auto& x : inputs) inputs_l.push_back(detail::cast_map<long double>(x));
  const auto target_l = detail::cast_map<long double>(target);

  std::vector<ArrayX<long double>*> work_arrays;
  work.for_each_array([&](const char*, ArrayX<long double>& a) { work_arrays.push_back(&a); });

  const long double eps = static_cast<long double>(epsilon);
  double max_rel = 0.0;
  for (std::size_t ai = 0; ai < work_arrays.size(); ++ai) {
    ArrayX<long double>& arr = *work_arrays[ai];
    for (Eigen::Index j = 0; j < arr.size(); ++j) {
      const long double saved = arr[j];
      arr[j] = saved + eps;
      const long double up = unrolled_cell_loss_l(work, inputs_l, target_l);
      arr[j] = saved - eps;
      const long double down = unrolled_cell_loss_l(work, inputs_l, target_l);
      arr[j] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * eps));
      const double a = static_cast<double>((*analytic_arrays[ai])[j]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace tamperwatch
